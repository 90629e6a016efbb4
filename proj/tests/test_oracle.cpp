#include "srg/hamiltonian.hpp"
#include "srg/oracle.hpp"

#include <gtest/gtest.h>

using namespace srg;

TEST(Oracle, DiagonalMatrix) {
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = 2.0;
  m(1, 1) = -1.0;
  m(2, 2) = 0.5;
  Spectrum s = exact_spectrum(m, true);
  EXPECT_EQ(s.values(0), cd(-1.0));
  EXPECT_EQ(s.values(2), cd(2.0));
  EXPECT_LE(s.max_residual, 1e-14);
  EXPECT_THROW(exact_spectrum(Mat::Zero(10, 10), true, false, 5), config_error);
}

TEST(Oracle, DisplacedOscillatorClosedForm) {
  EXPECT_DOUBLE_EQ(displaced_oscillator_energy(1.0, 0.1), -0.01);
  EXPECT_DOUBLE_EQ(displaced_oscillator_energy(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(displaced_oscillator_energy(2.0, 0.2), -0.02);
  for (auto [w, c] : {std::pair{1.0, 0.1}, std::pair{2.0, 0.2}}) {
    ModeSet m = explicit_modes({1.0}, {1.0});
    m.dispersion[0] = w;
    FockBasis b = build_basis(m, 12);
    Mat a = ladder(b, 0, LadderKind::annihilate);
    Mat H = w * a.adjoint() * a + c * (a + a.adjoint());
    EXPECT_NEAR(exact_spectrum(H, true, false).values(0).real(), -c * c / w, 1e-12);
  }
}

TEST(Oracle, TrackDisplacementBranch) {
  ModeSet m = explicit_modes({1.0}, {1.0});
  FockBasis b = build_basis(m, 12);
  Mat a = ladder(b, 0, LadderKind::annihilate);
  auto fam = [&](double g) -> Mat { return a.adjoint() * a + g * (a + a.adjoint()); };
  Vec v0 = Vec::Zero(b.dim());
  v0(0) = 1.0;
  std::vector<double> path;
  for (int i = 1; i <= 10; ++i) path.push_back(0.01 * i);
  Branch br = track_eigenvalue(fam, 0.0, v0, path, true);
  for (std::size_t i = 0; i < path.size(); ++i) EXPECT_NEAR(br.values[i].real(), -path[i] * path[i], 1e-12);
}

TEST(Oracle, CrossingDetector) {
  auto fam = [](double t) -> Mat {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = t;
    m(1, 1) = -t;
    return m;
  };
  Vec v = Vec::Zero(2);
  v(0) = 1.0;
  Branch br = track_eigenvalue(fam, -1.0, v, {-1.0, -0.5, 0.5, 1.0}, true);
  bool fired = false;
  for (bool c : br.crossing) fired = fired || c;
  EXPECT_TRUE(fired);
  EXPECT_NEAR(br.values.back().real(), 1.0, 1e-14);
}

TEST(Oracle, DeformedFreeTensorSum) {
  GHHamiltonian H = build_nelson(two_level_particle(0.25, 1.0), kappa_sqrt_gauss(0.3), 0.0, 0.5, gauss_modes(2));
  cd th(0, 0.2);
  GHHamiltonian D = complex_deform(H, th);
  FockBasis b = build_basis(D.modes, 2);
  Spectrum s = exact_spectrum(assemble_gh(D, b), false, false);
  for (int i = 0; i < s.values.size(); ++i) {
    double best = 1e9;
    for (int st = 0; st < b.dim(); ++st)
      for (double l : {0.0, 0.25}) best = std::min(best, std::abs(s.values(i) - (l + std::exp(-th) * b.energy(st))));
    EXPECT_LT(best, 1e-12);
  }
}

TEST(Oracle, BoundStateRealUnderDeformation) {
  GHHamiltonian H = build_nelson(two_level_particle(0.25, 1.0), kappa_sqrt_gauss(0.15), 0.1, 0.5, gauss_modes(24));
  FockBasis b = build_basis(H.modes, 2);
  double e0 = exact_spectrum(assemble_gh(H, b), true, false).values(0).real();
  Spectrum s = exact_spectrum(assemble_gh(complex_deform(H, cd(0, 0.2)), b), false, false);
  EXPECT_NEAR(std::abs(s.values(0) - e0), 0.0, 1e-9);
}
