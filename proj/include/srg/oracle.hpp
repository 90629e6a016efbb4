#pragma once

#include "srg/common.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace srg {

struct Spectrum {
  Vec values;       // sorted by real part, then imaginary part
  Mat vectors;      // columns, unit norm; empty unless requested
  double max_residual = 0.0;  // max ||M v - lambda v|| / ||M||
};

inline constexpr int oracle_dim_cap = 4096;

inline Spectrum exact_spectrum(const Mat& M, bool hermitian, bool vectors = true, int cap = oracle_dim_cap) {
  if (M.rows() != M.cols()) throw config_error("oracle needs a square matrix");
  if (M.rows() > cap) throw config_error("matrix dimension exceeds oracle cap");
  Spectrum out;
  Vec ev;
  Mat V;
  if (hermitian) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw convergence_error("hermitian eigensolver failed");
    ev = es.eigenvalues().cast<cd>();
    V = es.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Mat> es(M, true);
    if (es.info() != Eigen::Success) throw convergence_error("eigensolver failed");
    ev = es.eigenvalues();
    V = es.eigenvectors();
  }
  int n = static_cast<int>(ev.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() < ev(b).real();
    return ev(a).imag() < ev(b).imag();
  });
  out.values.resize(n);
  Mat S(M.rows(), n);
  for (int i = 0; i < n; ++i) {
    out.values(i) = ev(order[i]);
    S.col(i) = V.col(order[i]).normalized();
  }
  double scale = std::max(M.norm(), 1e-300);
  for (int i = 0; i < n; ++i)
    out.max_residual = std::max(out.max_residual, (M * S.col(i) - out.values(i) * S.col(i)).norm() / scale);
  if (vectors) out.vectors = std::move(S);
  return out;
}

inline double displaced_oscillator_energy(double omega, double c) {
  if (!(omega > 0.0)) throw config_error("oscillator frequency must be positive");
  return -c * c / omega;
}

struct Branch {
  std::vector<double> params;
  std::vector<cd> values;
  std::vector<double> overlaps;
  std::vector<bool> crossing;  // rank of the tracked value changed at this step
};

// Follows one eigenpair along a parameter path by maximal eigenvector overlap.
inline Branch track_eigenvalue(const std::function<Mat(double)>& family, cd start_value, const Vec& start_vector,
                               const std::vector<double>& path, bool hermitian) {
  Branch b;
  Vec prev = start_vector.normalized();
  cd prev_val = start_value;
  int prev_rank = -1;
  for (double t : path) {
    Spectrum sp = exact_spectrum(family(t), hermitian);
    int best = -1;
    double best_ov = -1.0;
    for (int i = 0; i < sp.values.size(); ++i) {
      double ov = std::abs(prev.dot(sp.vectors.col(i)));
      if (ov > best_ov + 1e-12 ||
          (std::abs(ov - best_ov) <= 1e-12 && std::abs(sp.values(i) - prev_val) < std::abs(sp.values(best) - prev_val))) {
        best_ov = ov;
        best = i;
      }
    }
    if (best_ov < 0.5) throw convergence_error("eigenvalue branch is ambiguous (overlap < 0.5)");
    b.params.push_back(t);
    b.values.push_back(sp.values(best));
    b.overlaps.push_back(best_ov);
    b.crossing.push_back(prev_rank >= 0 && best != prev_rank);
    prev_rank = best;
    prev = sp.vectors.col(best);
    prev_val = sp.values(best);
  }
  return b;
}

} // namespace srg
