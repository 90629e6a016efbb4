#pragma once

#include "srg/common.hpp"
#include "srg/fock.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace srg {

struct Mollifier {
  std::string name;
  std::function<double(double)> phi, dphi;
};

inline Mollifier mollifier_tanh() {
  return {"tanh", [](double z) { return std::tanh(z); },
          [](double z) {
            double c = std::cosh(z);
            return 1.0 / (c * c);
          }};
}

inline Mollifier mollifier_identity() {
  return {"identity", [](double z) { return z; }, [](double) { return 1.0; }};
}

// slope * tanh(z); only slope 1 is admissible.
inline Mollifier mollifier_scaled_tanh(double slope) {
  return {"scaled_tanh", [=](double z) { return slope * std::tanh(z); },
          [=](double z) {
            double c = std::cosh(z);
            return slope / (c * c);
          }};
}

struct RadialCutoff {
  std::string name;
  std::function<double(double)> chi;
};

inline RadialCutoff gaussian_cutoff(double sigma) {
  return {"gaussian", [=](double k) { return std::exp(-k * k / (2.0 * sigma * sigma)); }};
}

struct PFCouplingReport {
  std::vector<double> x_grid, k_grid;
  // indexed [lambda][ix * nk + ik]
  std::array<std::vector<cd>, 2> f;
  std::array<std::vector<double>, 2> chi_abs;
  std::array<std::vector<double>, 2> g_kernel_abs;
  std::vector<double> vg_shift;  // (V_g - V)/g^2 per x
  std::vector<double> chi_l2;    // sum_lambda int |chi_{lambda,x}|^2 / |k| d^3k per x
  double c1 = 0.0;               // sup |chi| / min(1, sqrt|k| <x>)
  double c2 = 0.0;               // sup_x of chi_l2
};

namespace detail {
using V3 = std::array<double, 3>;
inline double dot3(const V3& a, const V3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct PFPoint {
  cd f;
  double chi_abs;
};

// f and |chi_{lambda,x}| for momentum kv with polarization e.
inline PFPoint pf_point(const V3& kv, const V3& e, const V3& x, const RadialCutoff& cut, const Mollifier& mol) {
  double k = std::sqrt(dot3(kv, kv));
  double s = std::sqrt(k) * dot3(e, x);
  cd phase = std::exp(-I1 * dot3(kv, x));
  double ch = cut.chi(k);
  cd f = phase * ch / std::sqrt(k) * mol.phi(s);
  // chi = e^{-ikx} chi(k) e (1 - phi'(s)) + i k f; e is orthogonal to k
  double a = std::abs(ch * (1.0 - mol.dphi(s)));
  double b = k * std::abs(f);
  return {f, std::sqrt(a * a + b * b)};
}
} // namespace detail

// Coupling functions of the generalized Pauli-Fierz transform. Sampled
// with k along z and x in the xz-plane at 60 degrees from k; integrals
// over d^3k use a product rule (radial GL x polar GL x azimuthal).
inline PFCouplingReport pauli_fierz_transform(const RadialCutoff& cut, const Mollifier& mol,
                                              const std::vector<double>& x_grid, const std::vector<double>& k_grid,
                                              int radial = 48, int polar = 16, int azimuthal = 16, double k_cut = 0.0) {
  if (std::abs(mol.dphi(0.0) - 1.0) > 1e-10) throw config_error("mollifier must satisfy phi'(0) = 1");
  for (double k : k_grid)
    if (!(k > 0.0)) throw config_error("Pauli-Fierz k-grid must be positive");
  PFCouplingReport rep;
  rep.x_grid = x_grid;
  rep.k_grid = k_grid;
  const double alpha = M_PI / 3.0;
  const detail::V3 xdir{std::sin(alpha), 0.0, std::cos(alpha)};
  const std::array<detail::V3, 2> pol{detail::V3{1, 0, 0}, detail::V3{0, 1, 0}};
  std::size_t nx = x_grid.size(), nk = k_grid.size();
  for (int l = 0; l < 2; ++l) {
    rep.f[l].resize(nx * nk);
    rep.chi_abs[l].resize(nx * nk);
    rep.g_kernel_abs[l].resize(nx * nk);
  }
  for (std::size_t ix = 0; ix < nx; ++ix) {
    detail::V3 x{x_grid[ix] * xdir[0], 0.0, x_grid[ix] * xdir[2]};
    double bracket = std::sqrt(1.0 + x_grid[ix] * x_grid[ix]);
    for (std::size_t ik = 0; ik < nk; ++ik) {
      detail::V3 kv{0.0, 0.0, k_grid[ik]};
      for (int l = 0; l < 2; ++l) {
        auto p = detail::pf_point(kv, pol[l], x, cut, mol);
        rep.f[l][ix * nk + ik] = p.f;
        rep.chi_abs[l][ix * nk + ik] = p.chi_abs;
        rep.g_kernel_abs[l][ix * nk + ik] = k_grid[ik] * std::abs(p.f);
        rep.c1 = std::max(rep.c1, p.chi_abs / std::min(1.0, std::sqrt(k_grid[ik]) * bracket));
      }
    }
  }
  // d^3k integrals
  if (k_cut <= 0.0) {
    k_cut = 1.0;
    while (cut.chi(k_cut) > 1e-16 && k_cut < 1e6) k_cut *= 2.0;
  }
  std::vector<double> ur, wr, uc, wc;
  gauss_legendre01(radial, ur, wr);
  gauss_legendre01(polar, uc, wc);
  rep.vg_shift.assign(nx, 0.0);
  rep.chi_l2.assign(nx, 0.0);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    detail::V3 x{x_grid[ix] * xdir[0], 0.0, x_grid[ix] * xdir[2]};
    double vg = 0.0, l2 = 0.0;
    for (int a = 0; a < radial; ++a) {
      // k = k_cut u^2 concentrates nodes near the origin
      double k = k_cut * ur[a] * ur[a];
      double wk = k_cut * 2.0 * ur[a] * wr[a] * k * k;
      for (int b = 0; b < polar; ++b) {
        double ct = 2.0 * uc[b] - 1.0, st = std::sqrt(1.0 - ct * ct);
        double wt = 2.0 * wc[b];
        for (int c = 0; c < azimuthal; ++c) {
          double ph = 2.0 * M_PI * (c + 0.5) / azimuthal;
          double wp = 2.0 * M_PI / azimuthal;
          detail::V3 kv{k * st * std::cos(ph), k * st * std::sin(ph), k * ct};
          std::array<detail::V3, 2> e{detail::V3{ct * std::cos(ph), ct * std::sin(ph), -st},
                                      detail::V3{-std::sin(ph), std::cos(ph), 0.0}};
          for (int l = 0; l < 2; ++l) {
            auto p = detail::pf_point(kv, e[l], x, cut, mol);
            double w = wk * wt * wp;
            vg += 2.0 * w * k * std::norm(p.f);
            l2 += w * p.chi_abs * p.chi_abs / k;
          }
        }
      }
    }
    rep.vg_shift[ix] = vg;
    rep.chi_l2[ix] = l2;
    rep.c2 = std::max(rep.c2, l2);
  }
  return rep;
}

inline std::vector<double> linspace(double a, double b, int n, bool skip_first = false) {
  std::vector<double> v;
  for (int i = skip_first ? 1 : 0; i <= n - (skip_first ? 0 : 1); ++i) v.push_back(a + (b - a) * i / (n - (skip_first ? 0 : 1)));
  return v;
}

} // namespace srg
