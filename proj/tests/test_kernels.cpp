#include "srg/kernels.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace srg;

namespace {

std::vector<double> kgrid() { return {0.1, 0.25, 0.5, 0.75, 1.0}; }

Kernel random_kernel(int m, int n, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Kernel k(m, n, default_r_grid(), kgrid());
  for (auto& v : k.values) v = {nd(rng), nd(rng)};
  return k;
}

KernelSequence seq_with(const Kernel& k) {
  KernelSequence s = free_field_sequence(kgrid(), std::vector<double>(5, 0.1));
  s.kernels[{k.m, k.n}] = k;
  return s;
}

} // namespace

TEST(Cutoff, PlateauAndSupport) {
  EXPECT_EQ(smooth_cutoff_chi1(0.5), 1.0);
  EXPECT_EQ(smooth_cutoff_chi1(0.9), 1.0);
  EXPECT_EQ(smooth_cutoff_chi1(1.2), 0.0);
  EXPECT_EQ(smooth_cutoff_chi1(1.0), 0.0);
  double c = smooth_cutoff_chi1(0.95);
  EXPECT_GT(c, 0.0);
  EXPECT_LT(c, 1.0);
}

TEST(Cutoff, FirstDerivativeBound) {
  double sup = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    double r = 0.85 + 0.2 * i / 200000.0;
    sup = std::max(sup, std::abs(smooth_cutoff_chi1_prime(r)));
  }
  EXPECT_LE(sup, 30.0);
  // numerical derivative agrees with the closed form
  double h = 1e-6, r = 0.93;
  double fd = (smooth_cutoff_chi1(r + h) - smooth_cutoff_chi1(r - h)) / (2 * h);
  EXPECT_NEAR(fd, smooth_cutoff_chi1_prime(r), 1e-7);
}

TEST(Cutoff, ChibarPartition) {
  for (double s : {0.0, 0.19, 0.2, 0.21, 0.3})
    EXPECT_NEAR(chi_rho(s, 0.22) * chi_rho(s, 0.22) + chibar_sq(s, 0.22), 1.0, 1e-15);
}

TEST(Symmetrize, OneVariableUnchanged) {
  std::mt19937 rng(1);
  Kernel k = random_kernel(1, 0, rng);
  EXPECT_EQ(symmetrize(k).values, k.values);
}

TEST(Symmetrize, TwoTermAverage) {
  Kernel k(2, 0, {0.0, 1.0}, kgrid());
  for (std::size_t kf = 0; kf < k.nk_total(); ++kf) {
    auto idx = k.unflat(kf);
    for (std::size_t ir = 0; ir < 2; ++ir) k.at(ir, kf) = k.k_grid[idx[0]];
  }
  Kernel s = symmetrize(k);
  for (std::size_t kf = 0; kf < k.nk_total(); ++kf) {
    auto idx = k.unflat(kf);
    EXPECT_NEAR(std::abs(s.at(0, kf) - 0.5 * (k.k_grid[idx[0]] + k.k_grid[idx[1]])), 0.0, 1e-15);
  }
}

TEST(Symmetrize, Idempotent) {
  std::mt19937 rng(2);
  for (auto mn : {std::pair{1, 1}, std::pair{2, 0}, std::pair{0, 2}}) {
    Kernel k = random_kernel(mn.first, mn.second, rng);
    Kernel s = symmetrize(k), ss = symmetrize(s);
    for (std::size_t i = 0; i < s.values.size(); ++i) EXPECT_NEAR(std::abs(s.values[i] - ss.values[i]), 0.0, 1e-14);
    EXPECT_LE(norm_mu_s(s, 0.5, 0), norm_mu_s(k, 0.5, 0) * (1 + 1e-12));
  }
}

TEST(Norms, WeightCancels) {
  Kernel k(1, 0, default_r_grid(), kgrid());
  for (std::size_t kf = 0; kf < 5; ++kf)
    for (std::size_t ir = 0; ir < k.r_grid.size(); ++ir) k.at(ir, kf) = -3.0 * std::pow(k.k_grid[kf], 0.5);
  EXPECT_NEAR(norm_mu_s(k, 0.5, 0), 3.0, 1e-14);
}

TEST(Norms, ZeroAndIdentity) {
  Kernel z(1, 1, default_r_grid(), kgrid());
  EXPECT_EQ(norm_mu_s(z, 0.5, 1), 0.0);
  KernelSequence f = free_field_sequence(kgrid(), std::vector<double>(5, 0.1));
  EXPECT_NEAR(norm_mu_s(f.w00(), 0.5, 1), 1.0, 1e-12);
}

TEST(Norms, NanRejected) {
  Kernel k(1, 0, default_r_grid(), kgrid());
  k.values[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(norm_mu_s(k, 0.5, 1), invalid_kernel);
}

TEST(Norms, SequenceNorms) {
  KernelSequence f = free_field_sequence(kgrid(), std::vector<double>(5, 0.1));
  EXPECT_NEAR(seq_norm(f, NormWhich::full), 1.0, 1e-12);
  EXPECT_EQ(seq_norm(f, NormWhich::interaction), 0.0);
  Kernel k(1, 0, default_r_grid(), kgrid());
  for (std::size_t kf = 0; kf < 5; ++kf)
    for (std::size_t ir = 0; ir < k.r_grid.size(); ++ir) k.at(ir, kf) = std::pow(k.k_grid[kf], 0.5);
  KernelSequence s = seq_with(k);
  EXPECT_NEAR(seq_norm(s, NormWhich::interaction), 4.0, 1e-12);
}

TEST(Norms, TriangleAndHomogeneity) {
  std::mt19937 rng(3);
  for (int t = 0; t < 10; ++t) {
    Kernel a = random_kernel(1, 1, rng), b = random_kernel(1, 1, rng), c = a;
    for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] += b.values[i];
    EXPECT_LE(norm_mu_s(c, 0.5, 1), (norm_mu_s(a, 0.5, 1) + norm_mu_s(b, 0.5, 1)) * (1 + 1e-12));
    Kernel d = a;
    for (auto& v : d.values) v *= 2.0;
    EXPECT_NEAR(seq_norm(seq_with(d), NormWhich::interaction), 2.0 * seq_norm(seq_with(a), NormWhich::interaction),
                1e-10);
  }
}

TEST(Polydisc, FreeFieldInsideEveryDisc) {
  KernelSequence f = free_field_sequence(kgrid(), std::vector<double>(5, 0.1));
  EXPECT_TRUE(polydisc_check(f, {0, 0, 0}).first);
  EXPECT_TRUE(polydisc_check(f, {0.1, 0.2, 0.3}).first);
  KernelSequence shifted = free_field_sequence(kgrid(), std::vector<double>(5, 0.1), 0.2);
  EXPECT_FALSE(polydisc_check(shifted, {0.1, 0.1, 0.1}).first);
}

TEST(Scaling, FreeFieldFixedPointAndConstants) {
  KernelSequence f = free_field_sequence(kgrid(), std::vector<double>(5, 0.1));
  KernelSequence g = scale_kernels(f, 0.25);
  for (std::size_t i = 0; i < f.w00().values.size(); ++i)
    EXPECT_NEAR(std::abs(g.w00().values[i] - f.w00().values[i]), 0.0, 1e-14);
  KernelSequence c = f;
  for (auto& v : c.kernels[{0, 0}].values) v = 0.3;
  KernelSequence cs = scale_kernels(c, 0.25);
  for (const auto& v : cs.w00().values) EXPECT_NEAR(std::abs(v - 1.2), 0.0, 1e-14);
  EXPECT_THROW(scale_kernels(f, 0.6), domain_error);
}

TEST(Scaling, SqrtKernel) {
  std::vector<double> k;
  for (int i = 1; i <= 40; ++i) k.push_back(i / 40.0);
  Kernel w(1, 0, default_r_grid(), k);
  for (std::size_t kf = 0; kf < k.size(); ++kf)
    for (std::size_t ir = 0; ir < w.r_grid.size(); ++ir) w.at(ir, kf) = std::sqrt(k[kf]);
  Kernel s = scale_kernel(w, 0.5, 0.5);
  for (std::size_t kf = 0; kf < k.size(); ++kf)
    EXPECT_NEAR(s.at(3, kf).real(), std::sqrt(0.5 * k[kf]), 1e-14);
  // without the weight, interpolation is only approximate off the nodes
  Kernel u = scale_kernel(w, 0.5);
  EXPECT_NEAR(u.at(0, 3).real(), std::sqrt(0.05), 1e-14);
  EXPECT_NEAR(u.at(0, 8).real(), std::sqrt(0.1125), 2e-3);
}

TEST(Scaling, ContractionInequality) {
  std::vector<double> k;
  for (int i = 1; i <= 20; ++i) k.push_back(i / 20.0);
  Kernel w(1, 1, default_r_grid(), k);
  for (std::size_t kf = 0; kf < w.nk_total(); ++kf) {
    auto idx = w.unflat(kf);
    for (std::size_t ir = 0; ir < w.r_grid.size(); ++ir)
      w.at(ir, kf) = std::sqrt(k[idx[0]] * k[idx[1]]) * (1.0 + 0.1 * w.r_grid[ir]);
  }
  double rho = 0.5;
  Kernel s = scale_kernel(w, rho, 0.5);
  EXPECT_LE(norm_mu_s(s, 0.5, 0), std::pow(rho, 1 + 0.5 * 2) * norm_mu_s(w, 0.5, 0) * (1 + 1e-12));
}

TEST(Dilation, IdentityAndFreeField) {
  ClosedKernel w00{0, 0, [](cd r, const std::vector<cd>&) { return r; }};
  cd th(0.0, 0.3);
  auto d = dilate_kernel(w00, th);
  EXPECT_NEAR(std::abs(d.fn(0.7, {}) - std::exp(-th) * 0.7), 0.0, 1e-15);
  auto id = dilate_kernel(w00, 0.0);
  EXPECT_EQ(id.fn(0.7, {}), cd(0.7));
  EXPECT_THROW(dilate_kernel(w00, cd(0, 0.8)), domain_error);
}

TEST(Dilation, SingleLegPrefactor) {
  // kappa(k) e^{-ikx} |k|^{-1/2} at theta = i pi/8: leg factor e^{-theta} and argument e^{-theta} k
  ClosedKernel w{1, 0, [](cd, const std::vector<cd>& k) { return std::sqrt(k[0]) * std::exp(-I1 * k[0] * 0.4); }};
  cd th(0.0, M_PI / 8);
  cd got = dilate_kernel(w, th).fn(0.0, {cd(0.6)});
  cd s = std::exp(-th);
  cd expect = s * std::sqrt(s * 0.6) * std::exp(-I1 * s * 0.6 * 0.4);
  EXPECT_NEAR(std::abs(got - expect), 0.0, 1e-15);
}

TEST(KernelJson, RoundTrip) {
  std::mt19937 rng(4);
  KernelSequence s = seq_with(random_kernel(1, 1, rng));
  KernelSequence t = sequence_from_json(to_json(s));
  ASSERT_EQ(t.kernels.size(), s.kernels.size());
  EXPECT_EQ(t.kernels.at({1, 1}).values, s.kernels.at({1, 1}).values);
}

TEST(Interp, OffGridAndExtrapolation) {
  Kernel w(0, 0, default_w00_grid(), kgrid());
  for (std::size_t i = 0; i < w.r_grid.size(); ++i) w.at(i, 0) = 2.0 * w.r_grid[i] + 1.0;
  EXPECT_NEAR(w.eval(0.37, 0).real(), 1.74, 1e-12);
  EXPECT_NEAR(w.eval(5.0, 0).real(), 11.0, 1e-10);
  EXPECT_THROW(w.eval(-0.1, 0), range_error);
}
