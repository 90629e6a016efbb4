#pragma once

#include "srg/feshbach.hpp"
#include "srg/hamiltonian.hpp"
#include "srg/kernels.hpp"

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace srg {

struct WickConfig {
  int L_max = 4;
  cd lambda = 0.0;
  double rho = 0.25;
  int j = 0;
  int max_mn = 2;
  double mu = 0.5;
  std::vector<double> r_grid = default_r_grid();
  std::vector<double> w00_grid = default_w00_grid();
  // External (output) grid in scaled units; empty means the scaled modes <= 1.
  std::vector<double> k_out, k_out_weights;
  bool track_discarded = false;
  int discard_L_max = 2;
  std::size_t composition_cap = 200000;
};

// ------------------------------------------------------------ vertices

// One interaction vertex. legs holds m+n indices into the engine's momentum
// list (creators first); E is the field energy between creators and
// annihilators.
class Vertex {
 public:
  virtual ~Vertex() = default;
  virtual int m() const = 0;
  virtual int n() const = 0;
  virtual void eval(double E, const int* legs, Mat& out) const = 0;
};

// g * w_{m,n}(k) tabulated over the momentum list.
class GHVertex final : public Vertex {
 public:
  GHVertex(const CouplingTerm& t, double g, const std::vector<double>& K) : m_(t.m), n_(t.n), nk_(K.size()) {
    std::size_t total = 1;
    for (int i = 0; i < m_ + n_; ++i) total *= nk_;
    table_.resize(total);
    std::vector<cd> args(m_ + n_);
    for (std::size_t f = 0; f < total; ++f) {
      std::size_t rem = f;
      for (int a = m_ + n_ - 1; a >= 0; --a) {
        args[a] = K[rem % nk_];
        rem /= nk_;
      }
      table_[f] = g * t.fn(args);
    }
  }
  int m() const override { return m_; }
  int n() const override { return n_; }
  void eval(double, const int* legs, Mat& out) const override {
    std::size_t f = 0;
    for (int a = 0; a < m_ + n_; ++a) f = f * nk_ + legs[a];
    out = table_[f];
  }

 private:
  int m_, n_;
  std::size_t nk_;
  std::vector<Mat> table_;
};

// Scalar kernel vertex; momentum-list index c sits on grid node grid_of[c].
class FlowVertex final : public Vertex {
 public:
  FlowVertex(const Kernel& k, std::vector<int> grid_of) : k_(k), ev_(k_), grid_of_(std::move(grid_of)) {}
  FlowVertex(const FlowVertex&) = delete;
  int m() const override { return k_.m; }
  int n() const override { return k_.n; }
  void eval(double E, const int* legs, Mat& out) const override {
    std::size_t f = 0;
    for (int a = 0; a < k_.legs(); ++a) f = f * k_.k_grid.size() + grid_of_[legs[a]];
    out.resize(1, 1);
    out(0, 0) = ev_(E, f);
  }

 private:
  Kernel k_;
  KernelEvaluator ev_;
  std::vector<int> grid_of_;
};

using ResolventFn = std::function<void(double E, Mat& out)>;

// ----------------------------------------------------------- the engine

// Vacuum contractions of products of vertices with resolvent insertions.
// For fixed external legs it returns
//   sum_{L} (-1)^{L-1} sum_{compositions} binomials * u^* <Omega| V_1 F V_2 F ... V_L |Omega> v
// with the pull-through shifts of the external momenta folded into the
// field-energy arguments. Externals are attached to vertices in
// consecutive blocks; callers symmetrize.
class WickEngine {
 public:
  WickEngine(std::vector<std::unique_ptr<Vertex>> vertices, std::vector<double> K, int Nq, std::vector<double> measure,
             int d, ResolventFn F, Vec u, Vec v, int L_max, std::size_t cap)
      : vertices_(std::move(vertices)),
        K_(std::move(K)),
        Nq_(Nq),
        c_(std::move(measure)),
        d_(d),
        F_(std::move(F)),
        u_(std::move(u)),
        v_(std::move(v)),
        L_max_(L_max),
        cap_(cap) {
    if (L_max_ < 1) throw config_error("L_max must be at least 1");
  }

  std::vector<std::string> warnings;

  cd evaluate(int M, int N, double r, const std::vector<int>& ec, const std::vector<int>& ea, int L_hi = -1) {
    int Lh = L_hi < 0 ? L_max_ : std::min(L_hi, L_max_);
    cd total = 0.0;
    for (int L = 1; L <= Lh; ++L)
      for (const auto& c : compositions(M, N, L)) total += (L % 2 ? 1.0 : -1.0) * c.weight * chain(c, r, ec, ea);
    return total;
  }

  std::size_t composition_count(int M, int N) {
    std::size_t t = 0;
    for (int L = 1; L <= L_max_; ++L) t += compositions(M, N, L).size();
    return t;
  }

 private:
  struct Slot {
    int t, me, p, ne, q;
  };
  struct Composition {
    std::vector<Slot> slots;
    double weight = 1.0;
    int cap = 0;
  };
  struct Space {
    FockBasis basis;
    std::unique_ptr<LadderTable> lt;
  };

  std::vector<std::unique_ptr<Vertex>> vertices_;
  std::vector<double> K_;
  int Nq_;
  std::vector<double> c_;
  int d_;
  ResolventFn F_;
  Vec u_, v_;
  int L_max_;
  std::size_t cap_;
  std::map<std::tuple<int, int, int>, std::vector<Composition>> comps_;
  std::map<int, Space> spaces_;

  static double binom(int a, int b) {
    double r = 1.0;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  }

  const std::vector<Composition>& compositions(int M, int N, int L) {
    auto key = std::make_tuple(M, N, L);
    auto it = comps_.find(key);
    if (it != comps_.end()) return it->second;
    std::vector<Composition> out;
    std::vector<Slot> cur(L);
    bool capped = false;
    auto rec = [&](auto&& self, int pos, int mleft, int nleft) -> void {
      if (capped) return;
      if (pos == L) {
        if (mleft || nleft) return;
        int occ = 0, cap = 0;
        for (int l = L - 1; l >= 0; --l) {
          if (occ < cur[l].q) return;
          occ += cur[l].p - cur[l].q;
          cap = std::max(cap, occ);
        }
        if (occ != 0) return;
        Composition c;
        c.slots = cur;
        c.cap = cap;
        for (const auto& s : cur) {
          const Vertex& v = *vertices_[s.t];
          c.weight *= binom(v.m(), s.me) * binom(v.n(), s.ne);
        }
        if (out.size() >= cap_) {
          capped = true;
          warnings.push_back("composition count capped at " + std::to_string(cap_));
          return;
        }
        out.push_back(std::move(c));
        return;
      }
      for (int t = 0; t < static_cast<int>(vertices_.size()); ++t) {
        const Vertex& v = *vertices_[t];
        for (int me = 0; me <= std::min(v.m(), mleft); ++me)
          for (int ne = 0; ne <= std::min(v.n(), nleft); ++ne) {
            cur[pos] = {t, me, v.m() - me, ne, v.n() - ne};
            self(self, pos + 1, mleft - me, nleft - ne);
          }
      }
    };
    rec(rec, 0, M, N);
    return comps_.emplace(key, std::move(out)).first->second;
  }

  Space& space(int cap) {
    auto it = spaces_.find(cap);
    if (it != spaces_.end()) return it->second;
    Space s;
    s.basis.modes.momenta.assign(K_.begin(), K_.begin() + Nq_);
    s.basis.modes.dispersion = s.basis.modes.momenta;
    s.basis.modes.weights.assign(Nq_, 1.0);
    FockBasis b = build_basis(s.basis.modes, cap);
    s.basis = std::move(b);
    s.lt = std::make_unique<LadderTable>(s.basis);
    return spaces_.emplace(cap, std::move(s)).first->second;
  }

  cd chain(const Composition& c, double r, const std::vector<int>& ec, const std::vector<int>& ea) {
    int L = static_cast<int>(c.slots.size());
    Space& sp = space(c.cap);
    const LadderTable& lt = *sp.lt;
    int D = sp.basis.dim(), nm = lt.nmodes;
    // external momentum sums per vertex
    std::vector<double> A(L, 0.0), B(L, 0.0);
    std::vector<int> oc(L), oa(L);
    for (int l = 0, pc = 0, pa = 0; l < L; ++l) {
      oc[l] = pc;
      oa[l] = pa;
      for (int i = 0; i < c.slots[l].me; ++i) A[l] += K_[ec[pc++]];
      for (int i = 0; i < c.slots[l].ne; ++i) B[l] += K_[ea[pa++]];
    }
    Mat amp = Mat::Zero(d_, D), next = Mat::Zero(d_, D);
    std::vector<char> on(D, 0), non(D, 0);
    amp.col(0) = v_;
    on[0] = 1;
    Mat Fm, Vm;
    std::vector<int> legs;
    for (int l = L - 1; l >= 0; --l) {
      if (l < L - 1) {
        double shift = r;
        for (int i = 0; i <= l; ++i) shift += B[i];
        for (int i = l + 1; i < L; ++i) shift += A[i];
        for (int s = 0; s < D; ++s)
          if (on[s]) {
            F_(shift + lt.energy[s], Fm);
            amp.col(s) = (Fm * amp.col(s)).eval();
          }
      }
      double mid_shift = r;
      for (int i = 0; i < l; ++i) mid_shift += B[i];
      for (int i = l + 1; i < L; ++i) mid_shift += A[i];
      const Slot& sl = c.slots[l];
      const Vertex& vx = *vertices_[sl.t];
      int legs_n = vx.m() + vx.n();
      legs.assign(legs_n, 0);
      for (int i = 0; i < sl.me; ++i) legs[i] = ec[oc[l] + i];
      for (int i = 0; i < sl.ne; ++i) legs[vx.m() + i] = ea[oa[l] + i];
      next.setZero();
      std::fill(non.begin(), non.end(), 0);
      for (int s = 0; s < D; ++s) {
        if (!on[s]) continue;
        Vec col = amp.col(s);
        auto create = [&](auto&& self, int cur, int depth, double a, int mid) -> void {
          if (depth == sl.p) {
            vx.eval(mid_shift + lt.energy[mid], legs.data(), Vm);
            next.col(cur) += a * (Vm * col);
            non[cur] = 1;
            return;
          }
          for (int i = 0; i < nm; ++i) {
            int t = lt.cre_to[cur * nm + i];
            if (t < 0) continue;
            legs[sl.me + depth] = i;
            self(self, t, depth + 1, a * lt.cre_amp[cur * nm + i] * c_[i], mid);
          }
        };
        auto annihilate = [&](auto&& self, int cur, int depth, double a) -> void {
          if (depth == sl.q) {
            create(create, cur, 0, a, cur);
            return;
          }
          for (int i = 0; i < nm; ++i) {
            int t = lt.ann_to[cur * nm + i];
            if (t < 0) continue;
            legs[vx.m() + sl.ne + depth] = i;
            self(self, t, depth + 1, a * lt.ann_amp[cur * nm + i] * c_[i]);
          }
        };
        annihilate(annihilate, s, 0, 1.0);
      }
      std::swap(amp, next);
      std::swap(on, non);
    }
    return u_.dot(amp.col(0));
  }
};

// ------------------------------------------------------ output assembly

namespace detail {

// All index tuples of length n over [0, nk), row-major.
inline std::vector<std::vector<int>> tuples(int n, int nk) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  if (n == 0) return {cur};
  if (nk == 0) return out;
  while (true) {
    out.push_back(cur);
    int a = n - 1;
    while (a >= 0 && ++cur[a] == nk) cur[a--] = 0;
    if (a < 0) break;
  }
  return out;
}

inline bool sorted_blocks(const std::vector<int>& t, int M) {
  for (int a = 1; a < M; ++a)
    if (t[a] < t[a - 1]) return false;
  for (std::size_t a = M + 1; a < t.size(); ++a)
    if (t[a] < t[a - 1]) return false;
  return true;
}

// ||.||_mu sup of the raw discarded kernel at r = 0 over sorted tuples.
inline double discarded_probe(WickEngine& eng, int M, int N, const std::vector<double>& k_out, int Ne_off,
                              double prefactor, double mu, int L_hi) {
  double sup = 0.0;
  int nk = static_cast<int>(k_out.size());
  for (const auto& t : tuples(M + N, nk)) {
    if (!sorted_blocks(t, M)) continue;
    std::vector<int> ec(M), ea(N);
    double kmin = 1e300;
    for (int a = 0; a < M; ++a) ec[a] = Ne_off + t[a];
    for (int b = 0; b < N; ++b) ea[b] = Ne_off + t[M + b];
    for (int i : t) kmin = std::min(kmin, k_out[i]);
    cd v = eng.evaluate(M, N, 0.0, ec, ea, L_hi);
    sup = std::max(sup, std::pow(kmin, -mu) * prefactor * std::abs(v));
  }
  return sup;
}

} // namespace detail

// ------------------------------------------------------- first decimation

struct DecimationReport {
  std::vector<std::string> warnings;
  std::vector<int> index_map;  // scaled mode -> physical mode
  std::map<std::pair<int, int>, std::size_t> composition_counts;
};

// rho^{-1} S_rho F_pi(H - lambda) projected onto the particle level j, as a
// kernel sequence on the scaled grid. H must be normalized (field part H_f).
inline KernelSequence first_decimation(const GHHamiltonian& H, const WickConfig& cfg, DecimationReport* rep = nullptr) {
  if (H.field_scale != cd(1.0)) throw config_error("first_decimation expects a normalized Hamiltonian");
  if (!(cfg.rho > 0.0 && cfg.rho <= 0.5)) throw domain_error("decimation scale must lie in (0, 1/2]");
  const ParticleModel& P = H.particle;
  if (P.rank(cfg.j) != 1) throw model_error("kernel pipeline supports simple eigenvalues only");
  double rho = cfg.rho;
  cd lambda = cfg.lambda;

  KernelSequence seq;
  seq.max_mn = cfg.max_mn;
  seq.mu = cfg.mu;
  std::vector<int> imap;
  if (cfg.k_out.empty()) {
    for (std::size_t i = 0; i < H.modes.size(); ++i)
      if (H.modes.momenta[i] / rho <= 1.0) {
        imap.push_back(static_cast<int>(i));
        seq.k_grid.push_back(H.modes.momenta[i] / rho);
        seq.k_weights.push_back(H.modes.weights[i] / (rho * rho * rho));
      }
  } else {
    seq.k_grid = cfg.k_out;
    seq.k_weights = cfg.k_out_weights;
  }
  if (rep) rep->index_map = imap;

  int Nq = static_cast<int>(H.modes.size()), Ne = static_cast<int>(seq.k_grid.size());
  std::vector<double> K = H.modes.momenta;
  for (double k : seq.k_grid) K.push_back(rho * k);
  std::vector<double> measure(Nq);
  for (int i = 0; i < Nq; ++i) measure[i] = H.modes.measure(i);

  std::vector<std::unique_ptr<Vertex>> vx;
  for (const auto& t : H.interaction.terms) vx.push_back(std::make_unique<GHVertex>(t, H.interaction.g, K));

  int j = cfg.j;
  std::vector<cd> lv;
  std::vector<Mat> proj;
  for (int i = 0; i < P.level_count(); ++i) {
    lv.push_back(P.level(i));
    proj.push_back(P.projection(i));
  }
  ResolventFn F = [=](double E, Mat& out) {
    out = Mat::Zero(P.dim(), P.dim());
    for (std::size_t i = 0; i < lv.size(); ++i) {
      double w = static_cast<int>(i) == j ? chibar_sq(E, rho) : 1.0;
      if (w == 0.0) continue;
      out += (w / (lv[i] + E - lambda)) * proj[i];
    }
  };
  WickEngine eng(std::move(vx), K, Nq, measure, P.dim(), F, P.left(j), P.right(j), cfg.L_max, cfg.composition_cap);
  bool coupled = H.interaction.g != 0.0 && !H.interaction.terms.empty();

  Kernel w00(0, 0, cfg.w00_grid, seq.k_grid);
  for (std::size_t ir = 0; ir < w00.r_grid.size(); ++ir) {
    double r = w00.r_grid[ir];
    cd val = lv[j] - lambda + rho * r;
    double c = smooth_cutoff_chi1(r);
    if (coupled && c > 0.0) val += c * c * eng.evaluate(0, 0, rho * r, {}, {});
    w00.at(ir, 0) = val / rho;
  }
  seq.kernels[{0, 0}] = std::move(w00);

  for (int tot = 1; tot <= cfg.max_mn && Ne > 0; ++tot)
    for (int M = tot; M >= 0; --M) {
      int N = tot - M;
      Kernel w(M, N, cfg.r_grid, seq.k_grid);
      if (coupled) {
        double pre = std::pow(rho, tot - 1);
        auto tup = detail::tuples(tot, Ne);
        std::vector<int> ec(M), ea(N);
        for (std::size_t kf = 0; kf < tup.size(); ++kf) {
          for (int a = 0; a < M; ++a) ec[a] = Nq + tup[kf][a];
          for (int b = 0; b < N; ++b) ea[b] = Nq + tup[kf][M + b];
          for (std::size_t ir = 0; ir < w.r_grid.size(); ++ir)
            w.at(ir, kf) = pre * eng.evaluate(M, N, rho * w.r_grid[ir], ec, ea);
        }
        w = symmetrize(w);
        if (rep) rep->composition_counts[{M, N}] = eng.composition_count(M, N);
      }
      seq.kernels[{M, N}] = std::move(w);
    }

  if (cfg.track_discarded && coupled && Ne > 0)
    for (int tot = cfg.max_mn + 1; tot <= cfg.max_mn + 2; ++tot)
      for (int M = tot; M >= 0; --M)
        seq.discarded_norm += std::pow(seq.xi, -tot) * detail::discarded_probe(eng, M, tot - M, seq.k_grid, Nq,
                                                                              std::pow(rho, tot - 1), cfg.mu,
                                                                              cfg.discard_L_max);
  for (const auto& [mn, k] : seq.kernels) check_finite(k);
  if (rep) rep->warnings.insert(rep->warnings.end(), eng.warnings.begin(), eng.warnings.end());
  return seq;
}

// ------------------------------------------------------ iterated step

// One field-only RG step: Feshbach with pi = chi_rho(H_f), resolvent
// insertions chibar^2 chi_1^2 / w00 from the current w00, then scaling.
inline KernelSequence rg_step(const KernelSequence& seq, double rho, const WickConfig& cfg,
                              std::vector<std::string>* warnings = nullptr) {
  if (!(rho > 0.0 && rho <= 0.5)) throw domain_error("scale rho must lie in (0, 1/2]");
  int nk = static_cast<int>(seq.k_grid.size());
  if (nk == 0) throw config_error("flow needs a nonempty k-grid");
  const Kernel& w00 = seq.w00();
  KernelEvaluator w00ev(w00);

  std::vector<double> K = seq.k_grid;
  K.insert(K.end(), seq.k_grid.begin(), seq.k_grid.end());
  std::vector<int> grid_of(2 * nk);
  for (int i = 0; i < 2 * nk; ++i) grid_of[i] = i % nk;
  std::vector<double> measure(nk);
  for (int i = 0; i < nk; ++i) measure[i] = std::sqrt(seq.k_weights[i] / seq.k_grid[i]);

  std::vector<std::unique_ptr<Vertex>> vx;
  for (const auto& [mn, k] : seq.kernels)
    if (mn.first + mn.second > 0) vx.push_back(std::make_unique<FlowVertex>(k, grid_of));
  bool coupled = !vx.empty();

  ResolventFn F = [&](double E, Mat& out) {
    out.resize(1, 1);
    double c = chibar_sq(E, rho) * std::pow(smooth_cutoff_chi1(E), 2);
    out(0, 0) = c == 0.0 ? cd(0.0) : c / w00ev(E, 0);
  };
  Vec one = Vec::Ones(1);
  WickEngine eng(std::move(vx), K, nk, measure, 1, F, one, one, cfg.L_max, cfg.composition_cap);

  KernelSequence out;
  out.max_mn = seq.max_mn;
  out.mu = seq.mu;
  out.xi = seq.xi;
  out.k_grid = seq.k_grid;
  out.k_weights = seq.k_weights;
  out.discarded_norm = seq.discarded_norm;

  Kernel nw(0, 0, w00.r_grid, seq.k_grid);
  for (std::size_t ir = 0; ir < nw.r_grid.size(); ++ir) {
    double r = nw.r_grid[ir];
    cd val = w00ev(rho * r, 0);
    double c = smooth_cutoff_chi1(r);
    if (coupled && c > 0.0) val += c * c * eng.evaluate(0, 0, rho * r, {}, {});
    nw.at(ir, 0) = val / rho;
  }
  out.kernels[{0, 0}] = std::move(nw);

  for (const auto& [mn, k] : seq.kernels) {
    auto [M, N] = mn;
    if (M + N == 0) continue;
    Kernel phys(M, N, k.r_grid, seq.k_grid);
    auto tup = detail::tuples(M + N, nk);
    std::vector<int> ec(M), ea(N);
    for (std::size_t kf = 0; kf < tup.size(); ++kf) {
      for (int a = 0; a < M; ++a) ec[a] = nk + tup[kf][a];
      for (int b = 0; b < N; ++b) ea[b] = nk + tup[kf][M + b];
      for (std::size_t ir = 0; ir < k.r_grid.size(); ++ir)
        phys.at(ir, kf) = eng.evaluate(M, N, rho * k.r_grid[ir], ec, ea);
    }
    out.kernels[mn] = symmetrize(rescale_momenta(phys, rho, k.r_grid, seq.mu));
  }

  if (cfg.track_discarded && coupled)
    for (int tot = seq.max_mn + 1; tot <= seq.max_mn + 2; ++tot)
      for (int M = tot; M >= 0; --M)
        out.discarded_norm += std::pow(seq.xi, -tot) * detail::discarded_probe(eng, M, tot - M, seq.k_grid, nk,
                                                                             std::pow(rho, tot - 1), seq.mu,
                                                                             cfg.discard_L_max);
  for (const auto& [mn, k] : out.kernels) check_finite(k);
  if (warnings) warnings->insert(warnings->end(), eng.warnings.begin(), eng.warnings.end());
  return out;
}

// ------------------------------------------------------------- flow

struct FlowRow {
  int step = 0;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  cd w00_at_0 = 0.0;
  double interaction_norm = 0.0;
  double discarded_norm = 0.0;
  double ratio = 0.0;  // gamma_t / gamma_{t-1}; 0 on the first row
  double B = 0.0;      // gamma / (rho (1 - 2 xi)^2)
  bool discard_flag = false;
};

struct FlowTrace {
  std::vector<FlowRow> rows;
  std::vector<std::string> warnings;
};

struct flow_divergence : error {
  flow_divergence(const std::string& what, FlowTrace t) : error(what), trace(std::move(t)) {}
  FlowTrace trace;
};

inline FlowRow flow_row(const KernelSequence& seq, int step, double rho, const FlowRow* prev) {
  NormReport nr = norm_report(seq);
  FlowRow row;
  row.step = step;
  row.w00_at_0 = seq.w00().eval(0.0, 0);
  row.alpha = nr.w00_at_0;
  row.beta = nr.w00_slope_dev;
  row.gamma = nr.interaction;
  row.interaction_norm = nr.interaction;
  row.discarded_norm = seq.discarded_norm;
  row.ratio = prev && prev->gamma > 0.0 ? row.gamma / prev->gamma : 0.0;
  // majorant ratio of the vertex series, with the sup (s = 0) norm and C = 1
  row.B = seq_norm(seq, NormWhich::interaction, 0) / (rho * (1.0 - 2.0 * seq.xi) * (1.0 - 2.0 * seq.xi));
  row.discard_flag = seq.discarded_norm > 0.1 * row.gamma && row.gamma > 0.0;
  return row;
}

struct FlowResult {
  FlowTrace trace;
  KernelSequence final;
};

// Iterates rg_step; leaving the polydisc (alpha > rho/2, beta > 1/2 or
// B >= 1) throws flow_divergence with the trace so far; 1/2 < B < 1 only
// adds a warning.
inline FlowResult flow(const KernelSequence& seq, int n_steps, double rho, const WickConfig& cfg) {
  FlowResult res;
  res.final = seq;
  auto check = [&](const FlowRow& r) {
    std::string why;
    if (r.alpha > rho / 2.0) why = "|w00(0)| exceeded rho/2";
    else if (r.beta > 0.5) why = "sup |w00' - 1| exceeded 1/2";
    else if (r.B >= 1.0) why = "vertex series majorant diverges (B >= 1)";
    else if (r.B > 0.5)
      res.trace.warnings.push_back("step " + std::to_string(r.step) + ": B = " + std::to_string(r.B) + " exceeds 1/2");
    if (!why.empty()) throw flow_divergence("flow diverged at step " + std::to_string(r.step) + ": " + why, res.trace);
  };
  res.trace.rows.push_back(flow_row(seq, 0, rho, nullptr));
  check(res.trace.rows.back());
  for (int s = 1; s <= n_steps; ++s) {
    res.final = rg_step(res.final, rho, cfg, &res.trace.warnings);
    res.trace.rows.push_back(flow_row(res.final, s, rho, &res.trace.rows[s - 1]));
    check(res.trace.rows.back());
  }
  return res;
}

inline std::string flow_csv(const FlowTrace& t) {
  std::ostringstream os;
  os.precision(17);
  os << "step,alpha,beta,gamma,w00_at_0_re,w00_at_0_im,interaction_norm,discarded_norm,ratio\n";
  for (const auto& r : t.rows)
    os << r.step << ',' << r.alpha << ',' << r.beta << ',' << r.gamma << ',' << r.w00_at_0.real() << ','
       << r.w00_at_0.imag() << ',' << r.interaction_norm << ',' << r.discarded_norm << ',' << r.ratio << '\n';
  return os.str();
}

// ------------------------------------------------- matrix-level pipeline

// Maps scaled-basis states onto the physical basis via the mode index map.
inline std::vector<int> map_states(const FockBasis& scaled, const FockBasis& big, const std::vector<int>& index_map) {
  std::vector<int> out(scaled.dim());
  for (int s = 0; s < scaled.dim(); ++s) {
    Occupation occ(big.modes.size(), 0);
    for (std::size_t i = 0; i < index_map.size(); ++i) occ[index_map[i]] = scaled.states[s][i];
    out[s] = big.find(occ);
    if (out[s] < 0) throw grid_mismatch("scaled state missing from the physical basis");
  }
  return out;
}

// rho^{-1} (u^* (x) 1) F_trunc (v (x) 1) on the mapped states.
inline Mat matrix_renormalized(const Decimation& dec, cd lambda, int L_max, const std::vector<int>& states) {
  Mat F = feshbach_truncated(dec, lambda, L_max);
  Vec u = dec.particle.left(dec.j), v = dec.particle.right(dec.j);
  int d = dec.d, n = static_cast<int>(states.size());
  Mat out(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      out(a, b) = u.dot(F.block(states[a] * d, states[b] * d, d, d) * v) / dec.rho;
  return out;
}

} // namespace srg
