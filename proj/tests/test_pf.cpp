#include "srg/pauli_fierz.hpp"

#include <gtest/gtest.h>

using namespace srg;

TEST(PauliFierz, OddMollifierVanishesAtOrigin) {
  auto rep = pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_tanh(), {0.0, 1.0}, {0.1, 0.5, 1.0}, 4, 2, 2);
  for (int l = 0; l < 2; ++l)
    for (std::size_t ik = 0; ik < 3; ++ik) EXPECT_EQ(rep.f[l][ik], cd(0.0));
}

TEST(PauliFierz, RejectsWrongSlope) {
  EXPECT_THROW(pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_scaled_tanh(2.0), {0.0}, {0.5}), config_error);
  EXPECT_THROW(pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_tanh(), {0.0}, {0.0}), config_error);
}

TEST(PauliFierz, IdentityMollifierSmallArgument) {
  // phi(z) = z: f = e^{-ikx} chi(k) (e.x), and the transverse part of chi drops out
  double x = 0.3, k = 0.2;
  auto rep = pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_identity(), {x}, {k}, 4, 2, 2);
  double ex = x * std::sin(M_PI / 3.0);
  cd expect = std::exp(-I1 * k * x * std::cos(M_PI / 3.0)) * std::exp(-k * k / 2.0) * ex;
  EXPECT_NEAR(std::abs(rep.f[0][0] - expect), 0.0, 1e-14);
  EXPECT_NEAR(rep.chi_abs[0][0], k * std::abs(expect), 1e-14);
}

TEST(PauliFierz, InfraredBoundIsFinite) {
  auto coarse = pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_tanh(), linspace(0.0, 20.0, 16),
                                      linspace(0.0, 4.0, 16, true), 4, 2, 2);
  auto fine = pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_tanh(), linspace(0.0, 20.0, 32),
                                    linspace(0.0, 4.0, 32, true), 4, 2, 2);
  EXPECT_TRUE(std::isfinite(coarse.c1));
  EXPECT_LT(fine.c1 / coarse.c1, 2.0);
  EXPECT_GT(fine.c2, 0.0);
}

TEST(PauliFierz, LinspaceEndpoints) {
  auto v = linspace(0.0, 4.0, 4, true);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_DOUBLE_EQ(v.front(), 1.0);
  EXPECT_DOUBLE_EQ(v.back(), 4.0);
  EXPECT_EQ(linspace(0.0, 1.0, 3).size(), 3u);
}
