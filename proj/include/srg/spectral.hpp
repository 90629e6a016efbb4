#pragma once

#include "srg/feshbach.hpp"
#include "srg/oracle.hpp"
#include "srg/rg.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace srg {

// Samples the boundary of Q_j (16 points per side) and the center; each
// weight S gives the norm of S (H_p - lambda)^{-1} Pbar S^{-1}.
inline double kappa_estimate(const ParticleModel& p, const SpectralRegion& reg, const std::vector<Mat>& weights = {}) {
  int d = p.dim();
  Mat Pbar = Mat::Identity(d, d) - p.projection(reg.j);
  if (Pbar.norm() < 1e-14 || !reg.bounded()) return std::numeric_limits<double>::infinity();
  std::vector<cd> pts{reg.lambda_j};
  double h = reg.half_side();
  const int per_side = 16;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < per_side; ++i) {
      double t = -h + 2.0 * h * i / per_side;
      cd off = s == 0 ? cd(t, -h) : s == 1 ? cd(h, t) : s == 2 ? cd(-t, h) : cd(-h, -t);
      pts.push_back(reg.lambda_j + off);
    }
  std::vector<Mat> ws = weights;
  if (ws.empty()) ws.push_back(Mat::Identity(d, d));
  double sup = 0.0;
  for (const Mat& S : ws) {
    Eigen::FullPivLU<Mat> luS(S);
    if (!luS.isInvertible()) throw config_error("weight matrix is singular");
    Mat Sinv = luS.inverse();
    for (cd z : pts) {
      Eigen::FullPivLU<Mat> lu(p.h_p - z * Mat::Identity(d, d));
      Mat R = lu.solve(Pbar);
      if (!R.allFinite()) throw spectrum_error("resolvent singular on Q_j");
      sup = std::max(sup, op_norm(S * R * Sinv));
    }
  }
  return 1.0 / sup;
}

inline double default_rho(double kappa, double g) {
  double r = std::min(kappa, 0.5);
  if (g > 0.0) r = std::min(r, std::sqrt(g));
  return r;
}

// Eigenvalue of the kernel Hamiltonian with smallest real part inside
// |e| <= radius.
inline cd effective_energy(const KernelSequence& seq, const FockBasis& basis, double radius = 0.5,
                           Vec* vector = nullptr) {
  Mat M = assemble_kernel_hamiltonian(seq, basis);
  Spectrum sp = exact_spectrum(M, false, vector != nullptr);
  int best = -1;
  for (int i = 0; i < sp.values.size(); ++i)
    if (std::abs(sp.values(i)) <= radius && (best < 0 || sp.values(i).real() < sp.values(best).real())) best = i;
  if (best < 0) throw spectrum_error("no eigenvalue of the kernel Hamiltonian in the stability disc");
  if (vector) *vector = sp.vectors.col(best);
  return sp.values(best);
}

// Subtracts w00(0) from w00 and returns it.
inline cd split_stable(KernelSequence& seq) {
  Kernel& w = seq.kernels.at({0, 0});
  cd E = w.eval(0.0, 0);
  for (auto& v : w.values) v -= E;
  return E;
}

struct SolveConfig {
  double rho = 0.0;  // 0 picks min(kappa, 1/2, sqrt g)
  int L_max = 4;
  int max_mn = 2;
  int n_max = 2;
  double tol = 1e-10;
  int max_iter = 50;
  double step = 1.0;
  double disc_radius = 0.5;
  std::vector<double> r_grid = default_r_grid();
  std::vector<double> w00_extra;
};

struct ResonanceResult {
  int j = 0;
  cd e;        // eigenvalue of H (undone normalization)
  cd e_G;      // eigenvalue of the normalized Hamiltonian
  int iterations = 0;
  double residual = 0.0;
  double rho = 0.0;
  double kappa = 0.0;
  double delta = 0.0;
  double max_slope_dev = 0.0;  // max |dphi/dz + 1| between iterates
  double alpha = 0.0;          // |w00(0)| of the last decimation, in scaled units
  bool stayed_in_region = true;
  std::optional<cd> theta;
  cd field_scale = 1.0;
};

struct PhiValue {
  cd phi, E, e;
  double alpha;
};

inline PhiValue eval_phi(const GHHamiltonian& G, int j, double rho, cd z, const SolveConfig& cfg) {
  WickConfig wc;
  wc.L_max = cfg.L_max;
  wc.lambda = z;
  wc.rho = rho;
  wc.j = j;
  wc.max_mn = cfg.max_mn;
  wc.mu = G.interaction.mu;
  wc.r_grid = cfg.r_grid;
  wc.w00_grid = merge_grid(default_w00_grid(), cfg.w00_extra);
  DecimationReport rep;
  KernelSequence seq = first_decimation(G, wc, &rep);
  PhiValue pv;
  pv.E = split_stable(seq);
  pv.alpha = std::abs(pv.E);
  pv.e = 0.0;
  if (!seq.k_grid.empty()) {
    ModeSet ms;
    ms.momenta = seq.k_grid;
    ms.weights = seq.k_weights;
    ms.dispersion = seq.k_grid;
    pv.e = effective_energy(seq, build_basis(ms, cfg.n_max), cfg.disc_radius);
  }
  pv.phi = rho * (pv.E + pv.e);
  return pv;
}

// Fixed point of z -> z + phi(z) started at lambda_j.
inline ResonanceResult solve_phi(const GHHamiltonian& H, int j, const SolveConfig& cfg = {}) {
  GHHamiltonian G = gh_normalized(H);
  ResonanceResult res;
  res.j = j;
  res.theta = H.theta;
  res.field_scale = H.field_scale;
  SpectralRegion reg = gap_and_region(G.particle, j);
  res.delta = reg.delta;
  res.kappa = kappa_estimate(G.particle, reg);
  res.rho = cfg.rho > 0.0 ? cfg.rho : default_rho(res.kappa, H.interaction.g);
  cd z = reg.lambda_j;
  PhiValue pv = eval_phi(G, j, res.rho, z, cfg);
  double s = cfg.step;
  int it = 0;
  while (std::abs(pv.phi) > cfg.tol && it < cfg.max_iter) {
    cd zn = z + s * pv.phi;
    PhiValue pn = eval_phi(G, j, res.rho, zn, cfg);
    ++it;
    if (std::abs(pn.phi) > std::abs(pv.phi) && s > 1e-3) {
      s *= 0.5;
      continue;
    }
    if (zn != z) res.max_slope_dev = std::max(res.max_slope_dev, std::abs((pn.phi - pv.phi) / (zn - z) + 1.0));
    z = zn;
    pv = pn;
    if (!reg.contains(z)) res.stayed_in_region = false;
  }
  if (std::abs(pv.phi) > cfg.tol) throw convergence_error("phi iteration did not converge");
  res.iterations = it;
  res.residual = std::abs(pv.phi);
  res.alpha = pv.alpha;
  res.e_G = z;
  res.e = H.field_scale * z;
  return res;
}

// Second-order decay rate: 4 pi^2 sum_{i<j} omega |<psi_i, w_{1,0}(omega) psi_j>|^2,
// omega = lambda_j - lambda_i, for open channels (omega <= 1).
inline double fgr_width(const GHHamiltonian& H, int j) {
  if (H.theta) throw model_error("fgr_width needs the undeformed Hamiltonian");
  if (j < 1) return 0.0;
  const ParticleModel& P = H.particle;
  const CouplingTerm* cre = nullptr;
  for (const auto& t : H.interaction.terms)
    if (t.m == 1 && t.n == 0) cre = &t;
  if (!cre) return 0.0;
  double gamma = 0.0;
  Vec vj = P.right(j);
  for (int i = 0; i < j; ++i) {
    double omega = (P.level(j) - P.level(i)).real();
    if (!(omega > 0.0) || omega > 1.0) continue;
    cd amp = P.left(i).dot(cre->fn({cd(omega)}) * vj);
    gamma += 4.0 * M_PI * M_PI * omega * std::norm(amp);
  }
  return gamma;
}

struct OracleEigen {
  cd value;
  double overlap = 0.0;
  std::vector<cd> spectrum;
};

// Eigenvalue of the assembled matrix whose eigenvector has the largest weight
// on (level j) x vacuum. Nearest-value selection is unreliable once the
// rotated continuum passes close to the level.
inline OracleEigen oracle_level_eigenvalue(const GHHamiltonian& H, int n_max, int j) {
  FockBasis b = build_basis(H.modes, n_max);
  Mat M = assemble_gh(H, b);
  bool herm = !H.theta && (M - M.adjoint()).norm() <= 1e-13 * std::max(1.0, M.norm());
  Spectrum sp = exact_spectrum(M, herm, true);
  int d = H.particle.dim();
  int vac = b.find(Occupation(H.modes.size(), 0));
  Vec u = H.particle.left(j);
  OracleEigen out;
  int best = -1;
  for (int i = 0; i < sp.values.size(); ++i) {
    double ov = std::abs(u.dot(sp.vectors.col(i).segment(vac * d, d)));
    if (ov > out.overlap) {
      out.overlap = ov;
      best = i;
    }
  }
  if (best < 0) throw spectrum_error("no eigenvector overlaps the unperturbed level");
  out.value = sp.values(best);
  out.spectrum.assign(sp.values.data(), sp.values.data() + sp.values.size());
  return out;
}

// All eigenvalues except e_j satisfy Re zeta >= 0 and |Im zeta| <= Re zeta / 2,
// zeta = e^theta (z - e_j). With a region, only z with e^theta z in it count.
inline bool cone_check(const std::vector<cd>& eigs, cd e_j, cd theta, const SpectralRegion* region = nullptr,
                       double tol = 1e-9) {
  cd rot = std::exp(theta);
  for (cd z : eigs) {
    if (std::abs(z - e_j) <= tol) continue;
    if (region && !region->contains(rot * z)) continue;
    cd zeta = rot * (z - e_j);
    if (zeta.real() < -tol || std::abs(zeta.imag()) > 0.5 * zeta.real() + tol) return false;
  }
  return true;
}

struct Reconstruction {
  Vec psi;
  double residual = 0.0;
};

// Psi = Q_pi(e) (v_j (x) Gamma* phi) with phi a kernel-Hamiltonian eigenvector
// on the scaled basis; states maps scaled states to the physical basis.
inline Reconstruction reconstruct_eigenvector(const Decimation& dec, cd e, const Vec& phi, const std::vector<int>& states) {
  int d = dec.d;
  int n = static_cast<int>(dec.H.rows());
  Vec seed = Vec::Zero(n);
  Vec vj = dec.particle.right(dec.j);
  for (std::size_t s = 0; s < states.size(); ++s) seed.segment(states[s] * d, d) = phi(s) * vj;
  PibarInverse inv = invert_h_pibar(dec, e, 40, 1e-14, true);
  Reconstruction r;
  r.psi = q_pi(dec, inv.X, QKind::plain) * seed;
  double nrm = r.psi.norm();
  if (nrm < 1e-300) throw spectrum_error("reconstructed eigenvector vanishes");
  r.residual = (dec.H * r.psi - e * r.psi).norm() / nrm;
  return r;
}

} // namespace srg
