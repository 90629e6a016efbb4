#pragma once

#include "srg/common.hpp"

#include <math.h>  // boost 1.74 pchip uses unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace srg {

// ---------------------------------------------------------------- cutoffs

namespace detail {
inline double bump_f(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double bump_fp(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
// C-infinity step: 0 at t<=0, 1 at t>=1.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = bump_f(t), b = bump_f(1.0 - t);
  return a / (a + b);
}
inline double smooth_step_prime(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  double a = bump_f(t), b = bump_f(1.0 - t);
  double ap = bump_fp(t), bp = -bump_fp(1.0 - t);
  return (ap * b - a * bp) / ((a + b) * (a + b));
}
} // namespace detail

inline constexpr double chi_inner = 0.9;

// 1 on [0, 9/10], 0 on [1, inf), smooth in between.
inline double smooth_cutoff_chi1(double r) {
  return detail::smooth_step((1.0 - r) / (1.0 - chi_inner));
}

inline double smooth_cutoff_chi1_prime(double r) {
  return -detail::smooth_step_prime((1.0 - r) / (1.0 - chi_inner)) / (1.0 - chi_inner);
}

inline double chi_rho(double s, double rho) { return smooth_cutoff_chi1(s / rho); }

// 1 - chi_rho^2, evaluated without cancellation.
inline double chibar_sq(double s, double rho) {
  double c = chi_rho(s, rho);
  return (1.0 - c) * (1.0 + c);
}

// ----------------------------------------------------------------- grids

inline std::vector<double> chebyshev_lobatto(int n, double a, double b) {
  std::vector<double> x(n);
  if (n == 1) {
    x[0] = a;
    return x;
  }
  for (int i = 0; i < n; ++i) x[i] = a + (b - a) * 0.5 * (1.0 - std::cos(M_PI * i / (n - 1)));
  x.front() = a;
  x.back() = b;
  return x;
}

inline std::vector<double> default_r_grid() { return chebyshev_lobatto(16, 0.0, 1.0); }

inline std::vector<double> default_w00_grid(double r_max = 4.0) {
  std::vector<double> g = default_r_grid();
  for (double r : {1.5, 2.0, 3.0, 4.0})
    if (r <= r_max) g.push_back(r);
  if (g.back() < r_max) g.push_back(r_max);
  return g;
}

// Sorted union; points closer than tol to an existing node are dropped.
inline std::vector<double> merge_grid(std::vector<double> g, const std::vector<double>& extra, double tol = 1e-12) {
  g.insert(g.end(), extra.begin(), extra.end());
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double v : g)
    if (out.empty() || v - out.back() > tol) out.push_back(v);
  return out;
}

// Index of the node equal to x within tol, or -1.
inline int find_node(const std::vector<double>& g, double x, double tol = 1e-13) {
  auto it = std::lower_bound(g.begin(), g.end(), x - tol);
  if (it != g.end() && std::abs(*it - x) <= tol) return static_cast<int>(it - g.begin());
  return -1;
}

// Three-point finite-difference derivative on a nonuniform grid.
inline std::vector<cd> finite_diff(const std::vector<double>& x, const std::vector<cd>& f) {
  std::size_t n = x.size();
  std::vector<cd> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / (x[1] - x[0]);
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double h1 = x[i] - x[i - 1], h2 = x[i + 1] - x[i];
    d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[i + 1];
  }
  {
    double h1 = x[1] - x[0], h2 = x[2] - x[1];
    d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
  }
  {
    double h1 = x[n - 2] - x[n - 3], h2 = x[n - 1] - x[n - 2];
    d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] +
               (2 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1];
  }
  return d;
}

// Monotone cubic interpolant of complex data with affine extrapolation
// past either end (slope taken from the interpolant at the end node).
class Interp1 {
 public:
  Interp1() = default;
  Interp1(std::vector<double> x, const std::vector<cd>& y) : x_(std::move(x)) {
    if (x_.size() != y.size() || x_.empty()) throw invalid_kernel("interpolation data mismatch");
    std::vector<double> re(y.size()), im(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      re[i] = y[i].real();
      im[i] = y[i].imag();
    }
    if (x_.size() >= 4) {
      re_ = std::make_shared<pchip_t>(std::vector<double>(x_), std::move(re));
      im_ = std::make_shared<pchip_t>(std::vector<double>(x_), std::move(im));
    } else {
      y_ = y;
    }
  }

  cd operator()(double t) const {
    double a = x_.front(), b = x_.back();
    if (t < a) return value(a) + (t - a) * slope(a);
    if (t > b) return value(b) + (t - b) * slope(b);
    return value(t);
  }

 private:
  using pchip_t = boost::math::interpolators::pchip<std::vector<double>>;

  cd value(double t) const {
    if (re_) return {(*re_)(t), (*im_)(t)};
    if (y_.size() == 1) return y_[0];
    std::size_t i = std::upper_bound(x_.begin(), x_.end(), t) - x_.begin();
    i = std::clamp<std::size_t>(i, 1, x_.size() - 1);
    double w = (t - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return (1.0 - w) * y_[i - 1] + w * y_[i];
  }

  cd slope(double t) const {
    if (re_) return {re_->prime(t), im_->prime(t)};
    if (y_.size() == 1) return 0.0;
    if (t <= x_.front()) return (y_[1] - y_[0]) / (x_[1] - x_[0]);
    std::size_t n = x_.size();
    return (y_[n - 1] - y_[n - 2]) / (x_[n - 1] - x_[n - 2]);
  }

  std::vector<double> x_;
  std::shared_ptr<pchip_t> re_, im_;
  std::vector<cd> y_;
};

// ---------------------------------------------------------------- kernels

// w_{m,n}[r; k_1..k_m, kt_1..kt_n] sampled on r_grid x k_grid^(m+n).
struct Kernel {
  int m = 0, n = 0;
  std::vector<double> r_grid, k_grid;
  std::vector<cd> values;

  Kernel() = default;
  Kernel(int m_, int n_, std::vector<double> r, std::vector<double> k)
      : m(m_), n(n_), r_grid(std::move(r)), k_grid(std::move(k)) {
    values.assign(r_grid.size() * nk_total(), cd(0.0));
  }

  int legs() const { return m + n; }
  std::size_t nk_total() const {
    std::size_t t = 1;
    for (int i = 0; i < legs(); ++i) t *= k_grid.size();
    return t;
  }
  cd& at(std::size_t ir, std::size_t kf) { return values[ir * nk_total() + kf]; }
  cd at(std::size_t ir, std::size_t kf) const { return values[ir * nk_total() + kf]; }

  std::size_t flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * k_grid.size() + i;
    return f;
  }
  std::vector<int> unflat(std::size_t f) const {
    std::vector<int> idx(legs());
    for (int j = legs() - 1; j >= 0; --j) {
      idx[j] = static_cast<int>(f % k_grid.size());
      f /= k_grid.size();
    }
    return idx;
  }

  std::vector<cd> line(std::size_t kf) const {
    std::vector<cd> v(r_grid.size());
    for (std::size_t i = 0; i < r_grid.size(); ++i) v[i] = at(i, kf);
    return v;
  }

  // Value at field energy r: exact at nodes, interpolated elsewhere.
  cd eval(double r, std::size_t kf) const {
    if (r < -1e-14) throw range_error("kernel evaluated at negative field energy");
    int i = find_node(r_grid, r);
    if (i >= 0) return at(i, kf);
    return Interp1(r_grid, line(kf))(r);
  }
};

// Cached per-line interpolants for repeated off-grid r evaluation.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const Kernel& k) : k_(&k), lines_(k.nk_total()) {}

  cd operator()(double r, std::size_t kf) const {
    int i = find_node(k_->r_grid, r);
    if (i >= 0) return k_->at(i, kf);
    if (r < -1e-14) throw range_error("kernel evaluated at negative field energy");
    auto& l = lines_[kf];
    if (!l) l = std::make_unique<Interp1>(k_->r_grid, k_->line(kf));
    return (*l)(r);
  }

  const Kernel& kernel() const { return *k_; }

 private:
  const Kernel* k_;
  mutable std::vector<std::unique_ptr<Interp1>> lines_;
};

inline void check_finite(const Kernel& k) {
  for (const cd& v : k.values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw invalid_kernel("kernel (" + std::to_string(k.m) + "," + std::to_string(k.n) + ") has non-finite values");
}

struct KernelSequence {
  int max_mn = 2;
  double mu = 0.5;
  double xi = 0.25;
  double discarded_norm = 0.0;
  std::vector<double> k_grid, k_weights;
  std::map<std::pair<int, int>, Kernel> kernels;

  const Kernel* find(int m, int n) const {
    auto it = kernels.find({m, n});
    return it == kernels.end() ? nullptr : &it->second;
  }
  const Kernel& w00() const {
    const Kernel* k = find(0, 0);
    if (!k) throw invalid_kernel("sequence has no w_{0,0}");
    return *k;
  }
};

// Sequence holding only w_{0,0}(r) = r + shift.
inline KernelSequence free_field_sequence(std::vector<double> k_grid, std::vector<double> k_weights, cd shift = 0.0,
                                          double mu = 0.5, int max_mn = 2) {
  KernelSequence s;
  s.max_mn = max_mn;
  s.mu = mu;
  s.k_grid = std::move(k_grid);
  s.k_weights = std::move(k_weights);
  Kernel w(0, 0, default_w00_grid(), s.k_grid);
  for (std::size_t i = 0; i < w.r_grid.size(); ++i) w.at(i, 0) = w.r_grid[i] + shift;
  s.kernels[{0, 0}] = std::move(w);
  return s;
}

// ----------------------------------------------------------- symmetrize

inline Kernel symmetrize(const Kernel& in) {
  Kernel out = in;
  if (in.m <= 1 && in.n <= 1) return out;
  std::size_t nk = in.nk_total();
  std::vector<int> pm(in.m), pn(in.n);
  for (std::size_t kf = 0; kf < nk; ++kf) {
    std::vector<int> idx = in.unflat(kf), perm(idx.size());
    std::iota(pm.begin(), pm.end(), 0);
    std::vector<std::size_t> images;
    do {
      std::iota(pn.begin(), pn.end(), 0);
      do {
        for (int a = 0; a < in.m; ++a) perm[a] = idx[pm[a]];
        for (int b = 0; b < in.n; ++b) perm[in.m + b] = idx[in.m + pn[b]];
        images.push_back(in.flat(perm));
      } while (std::next_permutation(pn.begin(), pn.end()));
    } while (std::next_permutation(pm.begin(), pm.end()));
    for (std::size_t ir = 0; ir < in.r_grid.size(); ++ir) {
      cd acc = 0.0;
      for (std::size_t f : images) acc += in.at(ir, f);
      out.at(ir, kf) = acc / static_cast<double>(images.size());
    }
  }
  return out;
}

// ------------------------------------------------------------------ norms

inline std::vector<cd> r_derivative(const Kernel& k, std::size_t kf) { return finite_diff(k.r_grid, k.line(kf)); }

inline double norm_mu_s(const Kernel& k, double mu, int s) {
  if (s != 0 && s != 1) throw invalid_kernel("only s = 0 or 1 supported");
  check_finite(k);
  if (k.legs() == 0) {
    std::vector<cd> d = r_derivative(k, 0);
    double sup = 0.0;
    for (const cd& v : d) sup = std::max(sup, std::abs(v));
    return std::abs(k.eval(0.0, 0)) + sup;
  }
  double sup0 = 0.0, sup1 = 0.0;
  for (std::size_t kf = 0; kf < k.nk_total(); ++kf) {
    double kmin = 1e300;
    for (int i : k.unflat(kf)) kmin = std::min(kmin, k.k_grid[i]);
    double weight = std::pow(kmin, -mu);
    for (std::size_t ir = 0; ir < k.r_grid.size(); ++ir) sup0 = std::max(sup0, weight * std::abs(k.at(ir, kf)));
    if (s == 1) {
      for (const cd& v : r_derivative(k, kf)) sup1 = std::max(sup1, weight * std::abs(v));
    }
  }
  return sup0 + sup1;
}

enum class NormWhich { full, interaction };

inline double seq_norm(const KernelSequence& seq, NormWhich which, int s = 1) {
  double total = 0.0;
  for (const auto& [mn, k] : seq.kernels) {
    int legs = mn.first + mn.second;
    if (which == NormWhich::interaction && legs == 0) continue;
    total += std::pow(seq.xi, -legs) * norm_mu_s(k, seq.mu, s);
  }
  return total;
}

struct PolydiscParams {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
};

struct NormReport {
  std::map<std::pair<int, int>, double> kernel_norms;
  double full = 0.0, interaction = 0.0;
  double w00_at_0 = 0.0;
  double w00_slope_dev = 0.0;
};

inline NormReport norm_report(const KernelSequence& seq) {
  NormReport r;
  for (const auto& [mn, k] : seq.kernels) r.kernel_norms[mn] = norm_mu_s(k, seq.mu, 1);
  r.full = seq_norm(seq, NormWhich::full);
  r.interaction = seq_norm(seq, NormWhich::interaction);
  const Kernel& w = seq.w00();
  r.w00_at_0 = std::abs(w.eval(0.0, 0));
  for (const cd& v : r_derivative(w, 0)) r.w00_slope_dev = std::max(r.w00_slope_dev, std::abs(v - 1.0));
  return r;
}

inline std::pair<bool, NormReport> polydisc_check(const KernelSequence& seq, const PolydiscParams& p) {
  NormReport r = norm_report(seq);
  // slack absorbs finite-difference roundoff on an exactly linear w00
  bool in = r.w00_at_0 <= p.alpha && r.w00_slope_dev <= p.beta + 1e-12 && r.interaction <= p.gamma;
  return {in, r};
}

// ---------------------------------------------------------------- scaling

namespace detail {
// Resample a flattened tensor along one k axis from grid to targets. The
// fiber is interpolated as k^{-mu} w and held constant below the first node.
inline std::vector<cd> resample_axis(const std::vector<cd>& v, std::size_t outer, std::size_t nk, std::size_t inner,
                                     const std::vector<double>& grid, const std::vector<double>& targets, double mu) {
  std::vector<cd> out(v.size());
  std::vector<cd> fiber(nk);
  std::vector<double> wgrid(nk), wtarget(nk);
  for (std::size_t j = 0; j < nk; ++j) {
    wgrid[j] = std::pow(grid[j], -mu);
    wtarget[j] = std::pow(targets[j], mu);
  }
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      for (std::size_t j = 0; j < nk; ++j) fiber[j] = v[(o * nk + j) * inner + in] * wgrid[j];
      Interp1 f(grid, fiber);
      for (std::size_t j = 0; j < nk; ++j) {
        cd& dst = out[(o * nk + j) * inner + in];
        int node = find_node(grid, targets[j]);
        if (node >= 0) dst = v[(o * nk + node) * inner + in];
        else if (targets[j] < grid.front()) dst = fiber.front() * wtarget[j];
        else dst = f(targets[j]) * wtarget[j];
      }
    }
  return out;
}
} // namespace detail

// k-interpolation step of s_rho applied to a kernel already sampled at
// physical field energies rho*r: returns rho^{m+n-1} w[rho r; rho k] on
// r_out with the kernel's k-grid.
inline Kernel rescale_momenta(const Kernel& phys, double rho, const std::vector<double>& r_out, double mu = 0.0) {
  if (phys.r_grid.size() != r_out.size()) throw grid_mismatch("rescale grid sizes differ");
  Kernel out(phys.m, phys.n, r_out, phys.k_grid);
  std::vector<double> targets(phys.k_grid.size());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    targets[j] = rho * phys.k_grid[j];
    if (!(targets[j] > 0.0 && targets[j] <= 1.0)) throw range_error("scaled momentum outside (0,1]");
  }
  std::vector<cd> v = phys.values;
  std::size_t nk = phys.k_grid.size(), total = phys.nk_total();
  for (int axis = 0; axis < phys.legs(); ++axis) {
    std::size_t inner = 1;
    for (int a = axis + 1; a < phys.legs(); ++a) inner *= nk;
    std::size_t outer = phys.r_grid.size() * (total / (inner * nk));
    v = detail::resample_axis(v, outer, nk, inner, phys.k_grid, targets, mu);
  }
  double f = std::pow(rho, phys.legs() - 1);
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = f * v[i];
  return out;
}

// Kernel of rho^{-1} S_rho(W[w]): rho^{m+n-1} w[rho r; rho k].
inline Kernel scale_kernel(const Kernel& w, double rho, double mu = 0.0) {
  Kernel phys(w.m, w.n, w.r_grid, w.k_grid);
  for (std::size_t ir = 0; ir < w.r_grid.size(); ++ir) {
    double r = rho * w.r_grid[ir];
    if (r > w.r_grid.back() + 1e-12 && w.legs() > 0) throw range_error("scaled field energy outside r-grid");
    phys.r_grid[ir] = r;
  }
  KernelEvaluator ev(w);
  for (std::size_t kf = 0; kf < w.nk_total(); ++kf)
    for (std::size_t ir = 0; ir < w.r_grid.size(); ++ir) phys.at(ir, kf) = ev(phys.r_grid[ir], kf);
  return rescale_momenta(phys, rho, w.r_grid, mu);
}

inline KernelSequence scale_kernels(const KernelSequence& seq, double rho) {
  if (!(rho > 0.0 && rho <= 0.5)) throw domain_error("scale rho must lie in (0, 1/2]");
  KernelSequence out = seq;
  for (auto& [mn, k] : out.kernels) k = scale_kernel(seq.kernels.at(mn), rho, seq.mu);
  return out;
}

// --------------------------------------------------------------- dilation

// Closed-form kernel, evaluable at complex r and k.
using KernelFn = std::function<cd(cd r, const std::vector<cd>& k)>;

struct ClosedKernel {
  int m = 0, n = 0;
  KernelFn fn;
};

inline constexpr double dilation_strip = M_PI / 4.0;

inline void check_strip(cd theta) {
  if (!(std::abs(theta.imag()) < dilation_strip)) throw domain_error("dilation angle outside |Im theta| < pi/4");
}

// U_theta, the Jacobian and the |k|^{-1/2} measure combine to a net
// e^{-theta} per leg; arguments move to e^{-theta} r, e^{-theta} k.
inline ClosedKernel dilate_kernel(const ClosedKernel& w, cd theta) {
  check_strip(theta);
  ClosedKernel out = w;
  cd pre = std::exp(-static_cast<double>(w.m + w.n) * theta);
  cd s = std::exp(-theta);
  KernelFn f = w.fn;
  out.fn = [f, pre, s](cd r, const std::vector<cd>& k) {
    std::vector<cd> ks(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) ks[i] = s * k[i];
    return pre * f(s * r, ks);
  };
  return out;
}

inline std::vector<ClosedKernel> dilate_kernels(const std::vector<ClosedKernel>& ws, cd theta) {
  std::vector<ClosedKernel> out;
  for (const auto& w : ws) out.push_back(dilate_kernel(w, theta));
  return out;
}

inline Kernel sample_kernel(const ClosedKernel& w, const std::vector<double>& r_grid, const std::vector<double>& k_grid) {
  Kernel k(w.m, w.n, r_grid, k_grid);
  std::vector<cd> args(k.legs());
  for (std::size_t kf = 0; kf < k.nk_total(); ++kf) {
    std::vector<int> idx = k.unflat(kf);
    for (int j = 0; j < k.legs(); ++j) args[j] = k_grid[idx[j]];
    for (std::size_t ir = 0; ir < r_grid.size(); ++ir) k.at(ir, kf) = w.fn(r_grid[ir], args);
  }
  return k;
}

// ---------------------------------------------------------------- JSON

inline nlohmann::json to_json(const Kernel& k, double mu) {
  nlohmann::json vals = nlohmann::json::array();
  for (const cd& v : k.values) vals.push_back({v.real(), v.imag()});
  return {{"m", k.m}, {"n", k.n}, {"mu", mu}, {"r_grid", k.r_grid}, {"k_grid", k.k_grid}, {"values", vals}};
}

inline Kernel kernel_from_json(const nlohmann::json& j) {
  Kernel k(j.at("m").get<int>(), j.at("n").get<int>(), j.at("r_grid").get<std::vector<double>>(),
           j.at("k_grid").get<std::vector<double>>());
  const auto& vals = j.at("values");
  if (vals.size() != k.values.size()) throw config_error("kernel snapshot has wrong value count");
  for (std::size_t i = 0; i < vals.size(); ++i) k.values[i] = {vals[i][0].get<double>(), vals[i][1].get<double>()};
  return k;
}

inline nlohmann::json to_json(const KernelSequence& s) {
  nlohmann::json ks = nlohmann::json::array();
  for (const auto& [mn, k] : s.kernels) ks.push_back(to_json(k, s.mu));
  return {{"xi", s.xi},
          {"mu", s.mu},
          {"max_mn", s.max_mn},
          {"discarded_norm", s.discarded_norm},
          {"k_grid", s.k_grid},
          {"k_weights", s.k_weights},
          {"kernels", ks}};
}

inline KernelSequence sequence_from_json(const nlohmann::json& j) {
  KernelSequence s;
  s.xi = j.at("xi").get<double>();
  s.mu = j.at("mu").get<double>();
  s.max_mn = j.at("max_mn").get<int>();
  s.discarded_norm = j.at("discarded_norm").get<double>();
  s.k_grid = j.at("k_grid").get<std::vector<double>>();
  s.k_weights = j.at("k_weights").get<std::vector<double>>();
  for (const auto& kj : j.at("kernels")) {
    Kernel k = kernel_from_json(kj);
    s.kernels[{k.m, k.n}] = std::move(k);
  }
  return s;
}

} // namespace srg
