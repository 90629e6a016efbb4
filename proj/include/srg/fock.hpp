#pragma once

#include "srg/common.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace srg {

// Radial field modes. Weights integrate over d^3k restricted to the unit
// ball, so a continuum field a(k) becomes b_i / sqrt(w_i).
struct ModeSet {
  std::vector<double> momenta;
  std::vector<double> weights;
  std::vector<double> dispersion;

  std::size_t size() const { return momenta.size(); }

  // Per-leg factor of the dk/|k|^{1/2} measure.
  double measure(std::size_t i) const { return std::sqrt(weights[i] / momenta[i]); }
};

inline void validate_modes(const ModeSet& m) {
  if (m.momenta.empty()) throw config_error("mode set is empty");
  if (m.weights.size() != m.momenta.size() || m.dispersion.size() != m.momenta.size())
    throw config_error("mode set arrays differ in length");
  for (std::size_t i = 0; i < m.size(); ++i) {
    double k = m.momenta[i];
    if (!(k > 0.0 && k <= 1.0)) throw config_error("mode momentum outside (0,1]");
    if (i > 0 && !(k > m.momenta[i - 1])) throw config_error("mode momenta not increasing");
    if (!(m.weights[i] > 0.0)) throw config_error("mode weight not positive");
    if (m.dispersion[i] != k) throw config_error("dispersion must equal momentum");
  }
}

inline ModeSet explicit_modes(std::vector<double> momenta, std::vector<double> weights) {
  ModeSet m;
  m.dispersion = momenta;
  m.momenta = std::move(momenta);
  m.weights = std::move(weights);
  validate_modes(m);
  return m;
}

// Gauss-Legendre nodes/weights on [0,1] via Golub-Welsch.
inline void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double v0 = es.eigenvectors()(0, i);
    x[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    w[i] = v0 * v0;  // 2 v0^2 on [-1,1], halved for [0,1]
  }
}

// count GL nodes in u, mapped by k = u^2 to cluster near the infrared end.
inline ModeSet gauss_modes(int count) {
  if (count <= 0) throw config_error("mode count must be positive");
  std::vector<double> u, wu;
  gauss_legendre01(count, u, wu);
  std::vector<double> k(count), w(count);
  for (int i = 0; i < count; ++i) {
    k[i] = u[i] * u[i];
    w[i] = wu[i] * 2.0 * u[i] * 4.0 * M_PI * k[i] * k[i];
  }
  return explicit_modes(k, w);
}

// Scaled copy k -> k/rho restricted to modes that land in (0,1].
// index_map[i] is the original index of scaled mode i.
inline ModeSet scaled_modes(const ModeSet& m, double rho, std::vector<int>* index_map = nullptr) {
  ModeSet out;
  if (index_map) index_map->clear();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double k = m.momenta[i] / rho;
    if (k > 1.0 + 1e-12) continue;
    k = std::min(k, 1.0);
    out.momenta.push_back(k);
    out.dispersion.push_back(k);
    out.weights.push_back(m.weights[i] / (rho * rho * rho));
    if (index_map) index_map->push_back(static_cast<int>(i));
  }
  return out;
}

using Occupation = std::vector<int>;

struct FockBasis {
  ModeSet modes;
  int n_max = 0;
  std::vector<Occupation> states;
  std::map<Occupation, int> index;

  int dim() const { return static_cast<int>(states.size()); }

  int find(const Occupation& occ) const {
    auto it = index.find(occ);
    return it == index.end() ? -1 : it->second;
  }

  double energy(int s) const {
    double e = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) e += states[s][i] * modes.dispersion[i];
    return e;
  }

  int occupation(int s) const {
    int n = 0;
    for (int v : states[s]) n += v;
    return n;
  }
};

namespace detail {
inline void enumerate_total(int mode, int left, Occupation& cur, std::vector<Occupation>& out) {
  int last = static_cast<int>(cur.size()) - 1;
  if (mode == last) {
    cur[mode] = left;
    out.push_back(cur);
    return;
  }
  for (int v = left; v >= 0; --v) {
    cur[mode] = v;
    enumerate_total(mode + 1, left - v, cur, out);
  }
}
} // namespace detail

// States graded by total occupation; within a grade, descending
// lexicographic order, so the one-boson state of mode i has index 1+i.
inline FockBasis build_basis(const ModeSet& modes, int n_max) {
  if (modes.size() == 0) throw config_error("cannot build a Fock basis without modes");
  if (n_max < 0) throw config_error("n_max must be nonnegative");
  FockBasis b;
  b.modes = modes;
  b.n_max = n_max;
  Occupation cur(modes.size(), 0);
  for (int n = 0; n <= n_max; ++n) detail::enumerate_total(0, n, cur, b.states);
  for (int s = 0; s < b.dim(); ++s) b.index.emplace(b.states[s], s);
  return b;
}

// Transition tables for a_i and a*_i; target -1 when the image vanishes
// or leaves the truncated space.
struct LadderTable {
  int dim = 0, nmodes = 0;
  std::vector<int> ann_to, cre_to;
  std::vector<double> ann_amp, cre_amp;
  std::vector<double> energy;

  explicit LadderTable(const FockBasis& b) : dim(b.dim()), nmodes(static_cast<int>(b.modes.size())) {
    ann_to.assign(dim * nmodes, -1);
    cre_to.assign(dim * nmodes, -1);
    ann_amp.assign(dim * nmodes, 0.0);
    cre_amp.assign(dim * nmodes, 0.0);
    energy.resize(dim);
    for (int s = 0; s < dim; ++s) {
      energy[s] = b.energy(s);
      Occupation occ = b.states[s];
      for (int i = 0; i < nmodes; ++i) {
        int n = occ[i];
        if (n > 0) {
          occ[i] = n - 1;
          ann_to[s * nmodes + i] = b.find(occ);
          ann_amp[s * nmodes + i] = std::sqrt(static_cast<double>(n));
        }
        occ[i] = n + 1;
        int t = b.find(occ);
        if (t >= 0) {
          cre_to[s * nmodes + i] = t;
          cre_amp[s * nmodes + i] = std::sqrt(static_cast<double>(n + 1));
        }
        occ[i] = n;
      }
    }
  }
};

enum class LadderKind { annihilate, create };

inline Mat ladder(const FockBasis& b, int mode, LadderKind kind) {
  if (mode < 0 || mode >= static_cast<int>(b.modes.size())) throw config_error("mode index out of range");
  Mat a = Mat::Zero(b.dim(), b.dim());
  for (int s = 0; s < b.dim(); ++s) {
    Occupation occ = b.states[s];
    int n = occ[mode];
    if (n == 0) continue;
    occ[mode] = n - 1;
    a(b.find(occ), s) = std::sqrt(static_cast<double>(n));
  }
  if (kind == LadderKind::create) return a.adjoint();
  return a;
}

inline Mat free_field_hamiltonian(const FockBasis& b) {
  Mat h = Mat::Zero(b.dim(), b.dim());
  for (int s = 0; s < b.dim(); ++s) h(s, s) = b.energy(s);
  return h;
}

inline Mat number_operator(const FockBasis& b) {
  Mat h = Mat::Zero(b.dim(), b.dim());
  for (int s = 0; s < b.dim(); ++s) h(s, s) = b.occupation(s);
  return h;
}

} // namespace srg
