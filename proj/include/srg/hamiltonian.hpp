#pragma once

#include "srg/fock.hpp"
#include "srg/kernels.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

namespace srg {

// ---------------------------------------------------------------- particle

struct ParticleModel {
  Mat h_p;
  Mat position;  // x-hat in the same basis; drives e^{-ikx}
  cd kappa_par = 0.5;

  Vec eigenvalues;  // sorted by real part, then imaginary part
  Mat V, Vinv;      // h_p = V diag(eigenvalues) Vinv
  std::vector<std::vector<int>> levels;  // clusters of equal eigenvalues

  int dim() const { return static_cast<int>(h_p.rows()); }
  int level_count() const { return static_cast<int>(levels.size()); }
  cd level(int j) const { return eigenvalues(levels.at(j).front()); }
  int rank(int j) const { return static_cast<int>(levels.at(j).size()); }

  // Riesz projection onto the level j eigenspace.
  Mat projection(int j) const {
    Mat p = Mat::Zero(dim(), dim());
    for (int i : levels.at(j)) p += V.col(i) * Vinv.row(i);
    return p;
  }
  // Right/left vectors of a simple level with left.adjoint() * right = 1.
  Vec right(int j) const {
    if (rank(j) != 1) throw model_error("level is degenerate");
    return V.col(levels[j][0]);
  }
  Vec left(int j) const {
    if (rank(j) != 1) throw model_error("level is degenerate");
    return Vinv.row(levels[j][0]).adjoint();
  }
};

inline ParticleModel make_particle(const Mat& h, const Mat& position = Mat()) {
  if (h.rows() == 0 || h.rows() != h.cols()) throw config_error("particle matrix must be square and nonempty");
  ParticleModel p;
  p.h_p = h;
  p.position = position.size() ? position : Mat::Zero(h.rows(), h.cols());
  if (p.position.rows() != h.rows() || p.position.cols() != h.cols())
    throw config_error("position matrix has the wrong shape");
  if (!p.position.isApprox(p.position.adjoint(), 1e-12) && p.position.norm() > 0)
    throw config_error("position matrix must be hermitian");
  int d = p.dim();
  Vec ev;
  Mat V, Vinv;
  double scale = std::max(1.0, h.norm());
  if ((h - h.adjoint()).norm() <= 1e-14 * scale) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    ev = es.eigenvalues().cast<cd>();
    V = es.eigenvectors();
    Vinv = V.adjoint();
  } else {
    Eigen::ComplexEigenSolver<Mat> es(h);
    ev = es.eigenvalues();
    V = es.eigenvectors();
    Eigen::FullPivLU<Mat> lu(V);
    if (!lu.isInvertible()) throw model_error("particle matrix is not diagonalizable");
    Vinv = lu.inverse();
  }
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() < ev(b).real();
    return ev(a).imag() < ev(b).imag();
  });
  p.eigenvalues.resize(d);
  p.V.resize(d, d);
  p.Vinv.resize(d, d);
  for (int i = 0; i < d; ++i) {
    p.eigenvalues(i) = ev(order[i]);
    p.V.col(i) = V.col(order[i]);
    p.Vinv.row(i) = Vinv.row(order[i]);
  }
  Mat rec = p.V * p.eigenvalues.asDiagonal() * p.Vinv;
  if ((rec - h).norm() > 1e-12 * scale) throw model_error("eigendecomposition does not reproduce the particle matrix");
  for (int i = 0; i < d; ++i) {
    bool placed = false;
    for (auto& lv : p.levels)
      if (std::abs(p.eigenvalues(lv.front()) - p.eigenvalues(i)) <= 1e-10 * scale) {
        lv.push_back(i);
        placed = true;
        break;
      }
    if (!placed) p.levels.push_back({i});
  }
  return p;
}

inline ParticleModel two_level_particle(double gap, double dipole) {
  Mat h = Mat::Zero(2, 2);
  h(1, 1) = gap;
  Mat x = Mat::Zero(2, 2);
  x(0, 1) = x(1, 0) = dipole;
  return make_particle(h, x);
}

inline ParticleModel trivial_particle(double energy = 0.0) { return make_particle(Mat::Constant(1, 1, energy)); }

// e^{-i z x} for hermitian x and complex z.
inline Mat exp_ikx(const Mat& x, cd z, double sign) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  Vec ph(x.rows());
  for (int i = 0; i < x.rows(); ++i) ph(i) = std::exp(sign * I1 * z * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// ------------------------------------------------------------- GH class

// Particle-matrix-valued coupling, analytic in its momentum arguments
// (creation legs first, then annihilation legs).
struct CouplingTerm {
  int m = 0, n = 0;
  std::function<Mat(const std::vector<cd>&)> fn;
};

struct GHInteraction {
  std::vector<CouplingTerm> terms;
  double g = 0.0;
  double mu = 0.0;
};

struct GHHamiltonian {
  ParticleModel particle;
  GHInteraction interaction;
  ModeSet modes;
  cd field_scale = 1.0;
  std::optional<cd> theta;
  // Closed-form deformed particle matrix; identity family by default.
  std::function<Mat(cd)> particle_family;
};

using KappaFn = std::function<cd(cd)>;

struct KappaSpec {
  KappaFn fn;
  double bound_c = 1.0;  // |kappa(k)| <= c min(1, |k|^mu)
};

inline KappaSpec kappa_sqrt_gauss(double sigma, double amplitude = 1.0) {
  return {[=](cd k) { return amplitude * std::sqrt(k) * std::exp(-k * k / (2.0 * sigma * sigma)); },
          std::abs(amplitude)};
}

inline KappaSpec kappa_const(double c0) {
  return {[=](cd) { return cd(c0); }, std::abs(c0)};
}

inline KappaSpec kappa_linear_gauss(double sigma, double amplitude = 1.0) {
  return {[=](cd k) { return amplitude * k * std::exp(-k * k / (2.0 * sigma * sigma)); }, std::abs(amplitude)};
}

// Linear coupling g * int kappa(k) (e^{-ikx} a*(k) + e^{ikx} a(k)) dk/|k|^{1/2}.
inline GHHamiltonian build_nelson(const ParticleModel& particle, const KappaSpec& kappa, double g, double mu,
                                  const ModeSet& modes) {
  validate_modes(modes);
  if (g < 0.0) throw config_error("coupling g must be nonnegative");
  double sq = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    double k = modes.momenta[i];
    double a = std::abs(kappa.fn(k));
    if (a > kappa.bound_c * std::min(1.0, std::pow(k, mu)) * (1.0 + 1e-12))
      throw model_error("kappa violates |kappa(k)| <= c min(1, |k|^mu)");
    sq += modes.weights[i] * a * a / k;
  }
  if (!std::isfinite(sq)) throw model_error("kappa is not square integrable against dk/|k|");
  GHHamiltonian H;
  H.particle = particle;
  H.modes = modes;
  H.interaction.g = g;
  H.interaction.mu = mu;
  H.particle_family = [h = particle.h_p](cd) { return h; };
  if (g == 0.0) return H;
  Mat x = particle.position;
  KappaFn kf = kappa.fn;
  H.interaction.terms.push_back({1, 0, [=](const std::vector<cd>& k) -> Mat { return kf(k[0]) * exp_ikx(x, k[0], -1.0); }});
  H.interaction.terms.push_back({0, 1, [=](const std::vector<cd>& k) -> Mat { return kf(k[0]) * exp_ikx(x, k[0], 1.0); }});
  return H;
}

// Sup over the mode grid of |w(k)|_op / min(xw^{m+n} prod |k|^{1/2}, 1)^mu
// for linear terms; xw is the model-supplied stand-in for <x>.
inline double gh_coupling_norm(const GHHamiltonian& H, const CouplingTerm& t, double mu, double xw = 1.0) {
  if (t.m + t.n != 1) throw model_error("coupling norm implemented for linear terms");
  double sup = 0.0;
  for (double k : H.modes.momenta) {
    Mat w = t.fn({cd(k)});
    double op = Eigen::JacobiSVD<Mat>(w).singularValues()(0);
    double den = std::pow(std::min(xw * std::sqrt(k), 1.0), mu);
    sup = std::max(sup, op / den);
  }
  return sup;
}

inline GHHamiltonian complex_deform(const GHHamiltonian& H, cd theta) {
  if (H.theta) throw model_error("Hamiltonian is already deformed");
  check_strip(theta);
  if (theta == cd(0.0)) return H;
  GHHamiltonian out = H;
  out.theta = theta;
  Mat hp = H.particle_family ? H.particle_family(theta) : H.particle.h_p;
  out.particle = make_particle(hp, H.particle.position);
  out.particle.kappa_par = H.particle.kappa_par * std::exp(-2.0 * theta);
  out.field_scale = H.field_scale * std::exp(-theta);
  cd s = std::exp(-theta);
  for (auto& t : out.interaction.terms) {
    auto f = t.fn;
    cd pre = std::exp(-static_cast<double>(t.m + t.n) * theta);
    t.fn = [f, pre, s](const std::vector<cd>& k) -> Mat {
      std::vector<cd> ks(k.size());
      for (std::size_t i = 0; i < k.size(); ++i) ks[i] = s * k[i];
      return pre * f(ks);
    };
  }
  return out;
}

// Divide through by the field prefactor so the field part is exactly H_f.
inline GHHamiltonian gh_normalized(const GHHamiltonian& H) {
  if (H.field_scale == cd(1.0)) return H;
  GHHamiltonian out = H;
  cd f = 1.0 / H.field_scale;
  out.particle = make_particle(H.particle.h_p * f, H.particle.position);
  out.field_scale = 1.0;
  out.particle_family = nullptr;
  for (auto& t : out.interaction.terms) {
    auto fn = t.fn;
    t.fn = [fn, f](const std::vector<cd>& k) -> Mat { return f * fn(k); };
  }
  return out;
}

// --------------------------------------------------------------- assembly

namespace detail {

inline void check_same_modes(const ModeSet& a, const ModeSet& b) {
  if (a.size() != b.size()) throw grid_mismatch("mode sets differ in size");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a.momenta[i] - b.momenta[i]) > 1e-12 || std::abs(a.weights[i] - b.weights[i]) > 1e-12 * a.weights[i])
      throw grid_mismatch("mode sets differ");
}

// Visits every normal-ordered transition a*(x_1..x_m) a(y_1..y_n) |s>:
// cb(target, amplitude incl. sqrt factors and measures, mid_state, mode indices x..., y...).
template <class CB>
void for_each_monomial(const LadderTable& lt, const std::vector<double>& measure, int s, int m, int n, CB&& cb) {
  std::vector<int> modes(m + n);
  auto create = [&](auto&& self, int cur, int depth, double amp, int mid) -> void {
    if (depth == m) {
      cb(cur, amp, mid, modes);
      return;
    }
    for (int i = 0; i < lt.nmodes; ++i) {
      int t = lt.cre_to[cur * lt.nmodes + i];
      if (t < 0) continue;
      modes[depth] = i;
      self(self, t, depth + 1, amp * lt.cre_amp[cur * lt.nmodes + i] * measure[i], mid);
    }
  };
  auto annihilate = [&](auto&& self, int cur, int depth, double amp) -> void {
    if (depth == n) {
      create(create, cur, 0, amp, cur);
      return;
    }
    for (int i = 0; i < lt.nmodes; ++i) {
      int t = lt.ann_to[cur * lt.nmodes + i];
      if (t < 0) continue;
      modes[m + depth] = i;
      self(self, t, depth + 1, amp * lt.ann_amp[cur * lt.nmodes + i] * measure[i]);
    }
  };
  annihilate(annihilate, s, 0, 1.0);
}

} // namespace detail

// H_p (x) 1 + field_scale 1 (x) H_f + g sum W_{m,n}; index = state * d + p.
inline Mat assemble_gh(const GHHamiltonian& H, const FockBasis& basis) {
  detail::check_same_modes(H.modes, basis.modes);
  int d = H.particle.dim(), D = basis.dim();
  Mat M = Mat::Zero(D * d, D * d);
  LadderTable lt(basis);
  for (int s = 0; s < D; ++s) M.block(s * d, s * d, d, d) = H.particle.h_p + H.field_scale * lt.energy[s] * Mat::Identity(d, d);
  if (H.interaction.g == 0.0) return M;
  std::vector<double> measure(basis.modes.size());
  for (std::size_t i = 0; i < measure.size(); ++i) measure[i] = basis.modes.measure(i);
  for (const auto& t : H.interaction.terms) {
    // cache single-leg couplings per mode
    std::vector<Mat> cache;
    if (t.m + t.n == 1)
      for (double k : basis.modes.momenta) cache.push_back(t.fn({cd(k)}));
    for (int s = 0; s < D; ++s)
      detail::for_each_monomial(lt, measure, s, t.m, t.n, [&](int target, double amp, int, const std::vector<int>& md) {
        if (t.m + t.n == 1) {
          M.block(target * d, s * d, d, d) += H.interaction.g * amp * cache[md[0]];
        } else {
          std::vector<cd> k(md.size());
          for (std::size_t a = 0; a < md.size(); ++a) k[a] = basis.modes.momenta[md[a]];
          M.block(target * d, s * d, d, d) += H.interaction.g * amp * t.fn(k);
        }
      });
  }
  return M;
}

// Maps each basis mode to its index on the kernel k-grid.
inline std::vector<int> match_grid(const std::vector<double>& k_grid, const ModeSet& modes) {
  std::vector<int> idx(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    idx[i] = find_node(k_grid, modes.momenta[i], 1e-10);
    if (idx[i] < 0) throw grid_mismatch("basis mode is not on the kernel k-grid");
  }
  return idx;
}

// Matrix of W_{m,n}[w] on the basis, optionally sandwiched by chi_1(H_f).
inline Mat assemble_monomial(const Kernel& w, const FockBasis& basis, bool cutoff) {
  std::vector<int> gi = match_grid(w.k_grid, basis.modes);
  int D = basis.dim();
  Mat M = Mat::Zero(D, D);
  LadderTable lt(basis);
  std::vector<double> measure(basis.modes.size());
  for (std::size_t i = 0; i < measure.size(); ++i) measure[i] = basis.modes.measure(i);
  KernelEvaluator ev(w);
  std::vector<int> idx(w.legs());
  for (int s = 0; s < D; ++s) {
    double cs = cutoff ? smooth_cutoff_chi1(lt.energy[s]) : 1.0;
    if (cs == 0.0) continue;
    detail::for_each_monomial(lt, measure, s, w.m, w.n, [&](int target, double amp, int mid, const std::vector<int>& md) {
      double ct = cutoff ? smooth_cutoff_chi1(lt.energy[target]) : 1.0;
      if (ct == 0.0) return;
      for (std::size_t a = 0; a < md.size(); ++a) idx[a] = gi[md[a]];
      M(target, s) += ct * cs * amp * ev(lt.energy[mid], w.flat(idx));
    });
  }
  return M;
}

// w_{0,0}[H_f] + sum chi_1 W_{m,n} chi_1 on the Fock basis.
inline Mat assemble_kernel_hamiltonian(const KernelSequence& seq, const FockBasis& basis) {
  match_grid(seq.k_grid, basis.modes);
  int D = basis.dim();
  Mat M = Mat::Zero(D, D);
  const Kernel& w00 = seq.w00();
  for (int s = 0; s < D; ++s) M(s, s) = w00.eval(basis.energy(s), 0);
  for (const auto& [mn, k] : seq.kernels) {
    if (mn.first + mn.second == 0) continue;
    M += assemble_monomial(k, basis, true);
  }
  return M;
}

} // namespace srg
