#pragma once

#include "srg/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace srg {

// ------------------------------------------------------------ region Q_j

inline double half_line_distance(cd z, cd base) {
  if (z.real() >= base.real()) return std::abs(z.imag() - base.imag());
  return std::abs(z - base);
}

struct SpectralRegion {
  int j = 0;
  cd lambda_j;
  double delta = 0.0;  // +inf when no other level exists
  double half_side() const { return delta / 3.0; }
  bool bounded() const { return std::isfinite(delta); }
  bool contains(cd z) const {
    if (!bounded()) return true;
    double h = half_side() * (1.0 + 1e-12);
    return std::abs(z.real() - lambda_j.real()) <= h && std::abs(z.imag() - lambda_j.imag()) <= h;
  }
};

inline SpectralRegion gap_and_region(const ParticleModel& p, int j) {
  if (j < 0 || j >= p.level_count()) throw config_error("eigenvalue index out of range");
  SpectralRegion r;
  r.j = j;
  r.lambda_j = p.level(j);
  r.delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.level_count(); ++i)
    if (i != j) r.delta = std::min(r.delta, half_line_distance(r.lambda_j, p.level(i)));
  if (!(r.delta > 1e-14)) throw ungapped_error("eigenvalue is not isolated from the other thresholds");
  return r;
}

// --------------------------------------------------------------- decimation

struct Decimation {
  int j = 0;
  double rho = 0.0;
  int d = 0;
  Mat pi, pibar;
  Mat H, H0, I;  // assembled H = H0 + I
  ParticleModel particle;
  std::vector<Mat> projections;  // per particle level
  std::vector<double> energies;  // field energy per Fock state
  cd field_scale = 1.0;
};

inline Decimation build_decimation(const GHHamiltonian& H, const FockBasis& basis, int j, double rho) {
  if (!(rho > 0.0 && rho <= 0.5)) throw domain_error("decimation scale must lie in (0, 1/2]");
  Decimation dec;
  dec.j = j;
  dec.rho = rho;
  dec.particle = H.particle;
  dec.d = H.particle.dim();
  dec.field_scale = H.field_scale;
  for (int i = 0; i < H.particle.level_count(); ++i) dec.projections.push_back(H.particle.projection(i));
  int d = dec.d, D = basis.dim();
  Mat P = H.particle.projection(j);
  Mat Pbar = Mat::Identity(d, d) - P;
  dec.pi = Mat::Zero(D * d, D * d);
  dec.pibar = Mat::Zero(D * d, D * d);
  dec.H0 = Mat::Zero(D * d, D * d);
  dec.energies.resize(D);
  for (int s = 0; s < D; ++s) {
    double e = basis.energy(s);
    dec.energies[s] = e;
    double c = chi_rho(e, rho);
    dec.pi.block(s * d, s * d, d, d) = c * P;
    dec.pibar.block(s * d, s * d, d, d) = Pbar + std::sqrt(chibar_sq(e, rho)) * P;
    dec.H0.block(s * d, s * d, d, d) = H.particle.h_p + H.field_scale * e * Mat::Identity(d, d);
  }
  dec.H = assemble_gh(H, basis);
  dec.I = dec.H - dec.H0;
  return dec;
}

// pibar^2 (H0 - lambda)^{-1}, block diagonal in the Fock index.
inline Mat reduced_resolvent(const Decimation& dec, cd lambda) {
  int d = dec.d, D = static_cast<int>(dec.energies.size());
  Mat R = Mat::Zero(D * d, D * d);
  for (int s = 0; s < D; ++s) {
    double e = dec.energies[s];
    for (int i = 0; i < dec.particle.level_count(); ++i) {
      double w = (i == dec.j) ? chibar_sq(e, dec.rho) : 1.0;
      if (w == 0.0) continue;
      cd den = dec.particle.level(i) + dec.field_scale * e - lambda;
      if (std::abs(den) < 1e-300) throw convergence_error("H0 - lambda is singular on Ran pibar");
      R.block(s * d, s * d, d, d) += (w / den) * dec.projections[i];
    }
  }
  return R;
}

inline double op_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

struct PibarInverse {
  Mat X;               // pibar (H_pibar - lambda)^{-1} pibar
  int terms = 0;       // Neumann terms used (0 for the dense route)
  double ratio = 0.0;  // ||I R~||
  double tail = 0.0;   // geometric tail estimate
  double norm = 0.0;   // ||X||
};

// Neumann series sum_n (-1)^n R~ (I R~)^n, or the dense resummation
// R~ (1 + I R~)^{-1} when dense is set.
inline PibarInverse invert_h_pibar(const Decimation& dec, cd lambda, int L_max = 40, double tol = 1e-12,
                                   bool dense = false) {
  PibarInverse out;
  Mat R = reduced_resolvent(dec, lambda);
  Mat IR = dec.I * R;
  out.ratio = op_norm(IR);
  int n = static_cast<int>(R.rows());
  if (dense) {
    Eigen::PartialPivLU<Mat> lu(Mat::Identity(n, n) + IR);
    out.X = R * lu.inverse();
    out.norm = op_norm(out.X);
    return out;
  }
  if (out.ratio >= 1.0) throw convergence_error("Neumann ratio >= 1: rho too small or g too large");
  double rnorm = op_norm(R);
  Mat term = R;
  out.X = R;
  int used = 1;
  for (; used <= L_max; ++used) {
    out.tail = rnorm * std::pow(out.ratio, used) / (1.0 - out.ratio);
    if (out.tail < tol) break;
    term = -(term * IR).eval();
    out.X += term;
  }
  if (out.tail >= tol) throw convergence_error("Neumann tail above tolerance at L_max");
  out.terms = used;
  out.norm = op_norm(out.X);
  return out;
}

struct FeshbachResult {
  Mat F;
  int L_used = 0;
  double tail = 0.0;
  Mat X;
};

inline FeshbachResult feshbach_map(const Decimation& dec, cd lambda, int L_max = 40, double tol = 1e-12,
                                   bool dense = false) {
  PibarInverse inv = invert_h_pibar(dec, lambda, L_max, tol, dense);
  FeshbachResult r;
  int n = static_cast<int>(dec.H.rows());
  Mat Ipi = dec.I * dec.pi;
  r.F = dec.H0 - lambda * Mat::Identity(n, n) + dec.pi * Ipi - dec.pi * dec.I * inv.X * Ipi;
  r.L_used = inv.terms;
  r.tail = inv.tail;
  r.X = std::move(inv.X);
  return r;
}

// F with the Neumann series cut after L_max vertices:
// H0 - lambda + sum_{L=1}^{L_max} (-1)^{L-1} pi I (R~ I)^{L-1} pi.
inline Mat feshbach_truncated(const Decimation& dec, cd lambda, int L_max) {
  Mat R = reduced_resolvent(dec, lambda);
  int n = static_cast<int>(dec.H.rows());
  Mat acc = dec.H0 - lambda * Mat::Identity(n, n);
  Mat chain = dec.I;
  for (int L = 1; L <= L_max; ++L) {
    acc += ((L % 2) ? 1.0 : -1.0) * dec.pi * chain * dec.pi;
    chain = (chain * R * dec.I).eval();
  }
  return acc;
}

enum class QKind { plain, sharp };

inline Mat q_pi(const Decimation& dec, const Mat& X, QKind which) {
  if (which == QKind::plain) return dec.pi - X * dec.I * dec.pi;
  return dec.pi - dec.pi * dec.I * X;
}

// Columns span Ran pi; rows of the dual satisfy dual.adjoint() * basis = 1.
struct RangeBasis {
  Mat B, U;
};

inline RangeBasis range_of_pi(const Decimation& dec) {
  int d = dec.d, D = static_cast<int>(dec.energies.size());
  std::vector<int> cols;
  for (int s = 0; s < D; ++s)
    if (chi_rho(dec.energies[s], dec.rho) > 0.0) cols.push_back(s);
  const auto& lv = dec.particle.levels.at(dec.j);
  int r = static_cast<int>(lv.size());
  RangeBasis rb;
  rb.B = Mat::Zero(D * d, cols.size() * r);
  rb.U = Mat::Zero(D * d, cols.size() * r);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (int a = 0; a < r; ++a) {
      rb.B.block(cols[c] * d, c * r + a, d, 1) = dec.particle.V.col(lv[a]);
      rb.U.block(cols[c] * d, c * r + a, d, 1) = dec.particle.Vinv.row(lv[a]).adjoint();
    }
  return rb;
}

inline int kernel_dimension(const Mat& A, double rel_tol = 1e-8) {
  if (A.size() == 0) return 0;
  Eigen::BDCSVD<Mat> svd(A);
  const auto& sv = svd.singularValues();
  double thr = rel_tol * std::max(1.0, sv(0));
  int k = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) <= thr) ++k;
  return k;
}

inline double resolvent_identity_check(const Decimation& dec, cd lambda) {
  FeshbachResult fr = feshbach_map(dec, lambda, 40, 1e-14, true);
  RangeBasis rb = range_of_pi(dec);
  Mat Fr = rb.U.adjoint() * fr.F * rb.B;
  Eigen::FullPivLU<Mat> luF(Fr);
  if (!luF.isInvertible()) throw spectrum_error("Feshbach matrix is singular: lambda is in the spectrum");
  int n = static_cast<int>(dec.H.rows());
  Eigen::FullPivLU<Mat> luH(dec.H - lambda * Mat::Identity(n, n));
  if (!luH.isInvertible()) throw spectrum_error("H - lambda is singular");
  Mat Rh = luH.inverse();
  Mat Q = q_pi(dec, fr.X, QKind::plain), Qs = q_pi(dec, fr.X, QKind::sharp);
  Mat rhs = Q * rb.B * luF.inverse() * rb.U.adjoint() * Qs + fr.X;
  return op_norm(Rh - rhs) / op_norm(Rh);
}

} // namespace srg
