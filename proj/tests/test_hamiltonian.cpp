#include "srg/hamiltonian.hpp"
#include "srg/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace srg;

namespace {

GHHamiltonian toy(double g, int modes = 3) {
  return build_nelson(two_level_particle(0.25, 1.0), kappa_sqrt_gauss(0.3), g, 0.5, gauss_modes(modes));
}

std::vector<cd> sorted_eigs(const Mat& m, bool herm) {
  Spectrum s = exact_spectrum(m, herm, false);
  return {s.values.data(), s.values.data() + s.values.size()};
}

} // namespace

TEST(Particle, TwoLevelDecomposition) {
  ParticleModel p = two_level_particle(0.25, 1.0);
  EXPECT_EQ(p.level_count(), 2);
  EXPECT_NEAR(p.level(1).real(), 0.25, 1e-15);
  EXPECT_NEAR((p.projection(0) + p.projection(1) - Mat::Identity(2, 2)).norm(), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(p.left(1).dot(p.right(1)) - 1.0), 0.0, 1e-14);
}

TEST(Particle, NonNormalRiesz) {
  Mat h(2, 2);
  h << 0.0, 0.3, 0.0, cd(1.0, -0.2);
  ParticleModel p = make_particle(h);
  Mat P = p.projection(1);
  EXPECT_NEAR((P * P - P).norm(), 0.0, 1e-13);
  EXPECT_NEAR((h * P - P * h).norm(), 0.0, 1e-13);
}

TEST(Nelson, ZeroCouplingIsFree) {
  GHHamiltonian H = toy(0.0);
  EXPECT_TRUE(H.interaction.terms.empty());
  FockBasis b = build_basis(H.modes, 2);
  Mat M = assemble_gh(H, b);
  std::vector<cd> expect;
  for (int s = 0; s < b.dim(); ++s)
    for (double l : {0.0, 0.25}) expect.push_back(l + b.energy(s));
  std::sort(expect.begin(), expect.end(), [](cd a, cd c) { return a.real() < c.real(); });
  auto got = sorted_eigs(M, true);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(std::abs(got[i] - expect[i]), 0.0, 1e-12);
}

TEST(Nelson, KappaBoundViolation) {
  EXPECT_THROW(build_nelson(trivial_particle(), kappa_const(1.0), 0.1, 0.5, gauss_modes(4)), model_error);
  EXPECT_NO_THROW(build_nelson(trivial_particle(), kappa_const(1.0), 0.1, 0.0, gauss_modes(4)));
}

TEST(Nelson, DisplacementModelMatrix) {
  ModeSet m = explicit_modes({1.0}, {1.0});
  double g = 0.1;
  GHHamiltonian H = build_nelson(trivial_particle(), kappa_const(1.0), g, 0.0, m);
  FockBasis b = build_basis(m, 3);
  Mat M = assemble_gh(H, b);
  Mat expect = Mat::Zero(4, 4);
  for (int n = 0; n < 4; ++n) expect(n, n) = n;
  for (int n = 0; n < 3; ++n) expect(n + 1, n) = expect(n, n + 1) = g * std::sqrt(n + 1.0);
  EXPECT_NEAR((M - expect).norm(), 0.0, 1e-15);
}

TEST(Nelson, SelfAdjointAndCouplingNorm) {
  GHHamiltonian H = toy(0.1, 4);
  Mat M = assemble_gh(H, build_basis(H.modes, 2));
  EXPECT_NEAR((M - M.adjoint()).norm(), 0.0, 1e-12);
  double n = gh_coupling_norm(H, H.interaction.terms[0], 0.5);
  EXPECT_TRUE(std::isfinite(n));
  EXPECT_GT(n, 0.0);
}

TEST(Deform, IdentityAndStrip) {
  GHHamiltonian H = toy(0.05);
  FockBasis b = build_basis(H.modes, 2);
  EXPECT_EQ(assemble_gh(complex_deform(H, 0.0), b), assemble_gh(H, b));
  EXPECT_THROW(complex_deform(H, cd(0, 1.0)), domain_error);
}

TEST(Deform, FreeSpectrumRotates) {
  GHHamiltonian H = complex_deform(toy(0.0), cd(0, 0.3));
  FockBasis b = build_basis(H.modes, 2);
  Mat M = assemble_gh(H, b);
  cd s = std::exp(cd(0, -0.3));
  for (int st = 0; st < b.dim(); ++st)
    for (int p = 0; p < 2; ++p) {
      cd expect = (p ? 0.25 : 0.0) + s * b.energy(st);
      auto got = sorted_eigs(M, false);
      double best = 1e9;
      for (cd z : got) best = std::min(best, std::abs(z - expect));
      EXPECT_LT(best, 1e-12);
    }
}

TEST(Deform, AdjointRelation) {
  GHHamiltonian H = toy(0.1);
  FockBasis b = build_basis(H.modes, 2);
  cd th(0.05, 0.2);
  Mat A = assemble_gh(complex_deform(H, th), b), B = assemble_gh(complex_deform(H, std::conj(th)), b);
  EXPECT_NEAR((A.adjoint() - B).norm(), 0.0, 1e-12);
}

TEST(Deform, LowerHalfPlane) {
  // lower half-plane up to the quadrature error of the mode grid
  GHHamiltonian H0 = build_nelson(two_level_particle(0.25, 1.0), kappa_sqrt_gauss(0.15), 0.1, 0.5, gauss_modes(24));
  GHHamiltonian H = complex_deform(H0, cd(0, M_PI / 8));
  Spectrum s = exact_spectrum(assemble_gh(H, build_basis(H.modes, 2)), false, false);
  for (int i = 0; i < s.values.size(); ++i) EXPECT_LE(s.values(i).imag(), 1e-9);
}

TEST(Deform, RealThetaSimilarityOnDilatedGrid) {
  // For real theta the deformed operator on grid k equals the undeformed one on the grid e^{-theta} k
  // (unitary dilation), so the spectra agree.
  double th = 0.15;
  GHHamiltonian H = toy(0.1);
  ModeSet dil = H.modes;
  for (std::size_t i = 0; i < dil.size(); ++i) {
    dil.momenta[i] *= std::exp(-th);
    dil.dispersion[i] = dil.momenta[i];
    dil.weights[i] *= std::exp(-3 * th);
  }
  GHHamiltonian Hd = build_nelson(H.particle, kappa_sqrt_gauss(0.3), 0.1, 0.5, dil);
  GHHamiltonian Ht = complex_deform(H, th);
  Mat A = assemble_gh(Ht, build_basis(H.modes, 2));
  Mat B = assemble_gh(Hd, build_basis(dil, 2));
  auto ea = sorted_eigs(A, false), eb = sorted_eigs(B, true);
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(std::abs(ea[i] - eb[i]), 0.0, 1e-10);
}

TEST(Normalize, GFrameScaling) {
  GHHamiltonian H = complex_deform(toy(0.1), cd(0, 0.3));
  GHHamiltonian G = gh_normalized(H);
  FockBasis b = build_basis(H.modes, 2);
  EXPECT_NEAR((H.field_scale * assemble_gh(G, b) - assemble_gh(H, b)).norm(), 0.0, 1e-13);
}

TEST(KernelHamiltonian, FreeFieldAndInjectivity) {
  ModeSet m = explicit_modes({0.3, 0.6}, {0.1, 0.2});
  FockBasis b = build_basis(m, 2);
  KernelSequence f = free_field_sequence(m.momenta, m.weights);
  EXPECT_NEAR((assemble_kernel_hamiltonian(f, b) - free_field_hamiltonian(b)).norm(), 0.0, 1e-12);
  KernelSequence a = f, c = f;
  Kernel k1(1, 0, default_r_grid(), m.momenta), k2 = k1;
  for (auto& v : k1.values) v = 0.1;
  for (auto& v : k2.values) v = 0.2;
  a.kernels[{1, 0}] = k1;
  c.kernels[{1, 0}] = k2;
  EXPECT_GT((assemble_kernel_hamiltonian(a, b) - assemble_kernel_hamiltonian(c, b)).norm(), 1e-3);
}

TEST(KernelHamiltonian, GridMismatch) {
  ModeSet m = explicit_modes({0.3, 0.6}, {0.1, 0.2});
  KernelSequence f = free_field_sequence({0.3, 0.7}, {0.1, 0.2});
  EXPECT_THROW(assemble_kernel_hamiltonian(f, build_basis(m, 1)), grid_mismatch);
}

TEST(KernelHamiltonian, PullThrough) {
  ModeSet m = explicit_modes({0.3, 0.6}, {0.1, 0.2});
  FockBasis b = build_basis(m, 4);
  Mat f = Mat::Zero(b.dim(), b.dim()), fs = f;
  for (int i = 0; i < 2; ++i) {
    Mat a = ladder(b, i, LadderKind::annihilate);
    for (int s = 0; s < b.dim(); ++s) {
      f(s, s) = std::exp(-b.energy(s));
      fs(s, s) = std::exp(-(b.energy(s) + m.momenta[i]));
    }
    EXPECT_NEAR((a * f - fs * a).norm(), 0.0, 1e-14);
  }
}
