#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "zitterwalk/error.hpp"
#include "zitterwalk/noise.hpp"

namespace zitterwalk {
namespace {

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                                 {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                 {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rademacher, DeterministicAndExactlySigned) {
  const NoiseStream s(1, 0);
  EXPECT_EQ(rademacher(s, 5), rademacher(s, 5));
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const int e = s.rademacher(k);
    EXPECT_EQ(e * e, 1);
  }
}

TEST(Rademacher, ReplayIgnoresInterleavedStreams) {
  std::vector<int> first;
  const NoiseStream a(99, 3);
  for (std::uint64_t k = 0; k < 1000; ++k) first.push_back(a.rademacher(k));
  const NoiseStream b(99, 4);
  const NoiseStream c(100, 3);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    (void)b.rademacher(k);
    (void)c.rademacher(k);
    EXPECT_EQ(NoiseStream(99, 3).rademacher(k), first[k]);
  }
}

std::vector<std::int8_t> draws(const NoiseStream& s, std::size_t n) {
  std::vector<std::int8_t> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<std::int8_t>(s.rademacher(k));
  return out;
}

TEST(Rademacher, FairOverAMillionDraws) {
  const std::size_t n = 1'000'000;
  const auto v = draws(NoiseStream(1, 0), n);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n)));
  // lag-1 autocorrelation computed directly
  double lag1 = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) lag1 += (v[k] - mean) * (v[k + 1] - mean);
  double var = 0.0;
  for (auto e : v) var += (e - mean) * (e - mean);
  EXPECT_LE(std::abs(lag1 / var), 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Rademacher, IndependentAcrossPaths) {
  const std::size_t n = 1'000'000;
  const auto a = draws(NoiseStream(7, 0), n);
  const auto b = draws(NoiseStream(7, 1), n);
  EXPECT_LE(std::abs(sign_correlation(a, b)), 4.0 / std::sqrt(static_cast<double>(n)));
  const auto c = draws(NoiseStream(8, 0), n);
  EXPECT_LE(std::abs(sign_correlation(a, c)), 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(NoiseBiasReport, FairStream) {
  const auto r = noise_bias_report(NoiseStream(1, 0), 1'000'000);
  EXPECT_EQ(r.n, 1'000'000u);
  EXPECT_GT(r.chi_square_p_value, 0.001);
  EXPECT_LT(r.chi_square_p_value, 0.999);
  EXPECT_TRUE(r.fair());
  for (double a : r.autocorrelation) EXPECT_LE(std::abs(a), 0.004);
}

TEST(NoiseBiasReport, MatchesDirectChiSquare) {
  const auto v = draws(NoiseStream(3, 2), 5000);
  const auto r = noise_bias_report(v);
  const double plus = static_cast<double>(std::count(v.begin(), v.end(), 1));
  const double minus = 5000.0 - plus;
  const double chi = ((plus - 2500.0) * (plus - 2500.0) + (minus - 2500.0) * (minus - 2500.0)) / 2500.0;
  EXPECT_NEAR(r.chi_square, chi, 1e-9);
  EXPECT_NEAR(r.p_plus, plus / 5000.0, 1e-15);
  // chi-square with one degree of freedom: P(X > c) = erfc(sqrt(c / 2))
  EXPECT_NEAR(r.chi_square_p_value, std::erfc(std::sqrt(chi / 2.0)), 1e-12);
}

TEST(NoiseBiasReport, AllPlusStream) {
  const std::vector<std::int8_t> v(1000, 1);
  const auto r = noise_bias_report(v);
  EXPECT_EQ(r.p_plus, 1.0);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_FALSE(r.fair());
  EXPECT_TRUE(std::isnan(r.autocorrelation[0]));
}

TEST(NoiseBiasReport, RejectsShortSamples) {
  EXPECT_THROW((void)noise_bias_report(NoiseStream(1, 0), 50), InsufficientDataError);
  const std::vector<std::int8_t> v(99, 1);
  EXPECT_THROW((void)noise_bias_report(v), InsufficientDataError);
}

TEST(Gaussian, MomentsAndDeterminism) {
  const std::size_t n = 400'000;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  std::size_t beyond2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double z = standard_normal(11, k % 17, k);
    s1 += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
    if (std::abs(z) > 2.0) ++beyond2;
  }
  const double nd = static_cast<double>(n);
  EXPECT_LE(std::abs(s1 / nd), 4.0 / std::sqrt(nd));
  EXPECT_LE(std::abs(s2 / nd - 1.0), 4.0 * std::sqrt(2.0 / nd));
  EXPECT_LE(std::abs(s3 / nd), 4.0 * std::sqrt(15.0 / nd));
  EXPECT_LE(std::abs(s4 / nd - 3.0), 4.0 * std::sqrt(96.0 / nd));
  // P(|Z| > 2) = erfc(sqrt(2))
  const double p = std::erfc(std::sqrt(2.0));
  EXPECT_LE(std::abs(static_cast<double>(beyond2) / nd - p), 4.0 * std::sqrt(p * (1 - p) / nd));
  EXPECT_EQ(standard_normal(11, 3, 12345), standard_normal(11, 3, 12345));
  const auto pair = standard_normal_pair(11, 3, 10);
  EXPECT_EQ(pair[0], standard_normal(11, 3, 20));
  EXPECT_EQ(pair[1], standard_normal(11, 3, 21));
  EXPECT_EQ(NoiseStream(11, 3).gaussian(21), pair[1]);
}

TEST(Gaussian, KolmogorovDistanceToNormal) {
  const std::size_t n = 200'000;
  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = standard_normal(5, 0, k);
  std::sort(z.begin(), z.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                  std::abs(f - static_cast<double>(i + 1) / n)});
  }
  // one-sample KS 99.9% point 1.95 / sqrt(n)
  EXPECT_LT(d, 1.95 / std::sqrt(static_cast<double>(n)));
}

TEST(OpenUnit, StaysInsideTheInterval) {
  EXPECT_GT(noise_detail::open_unit(0), 0.0);
  EXPECT_LT(noise_detail::open_unit(0xffffffffU), 1.0);
  EXPECT_GT(noise_detail::open_unit52(0, 0), 0.0);
  EXPECT_LT(noise_detail::open_unit52(0xffffffffU, 0xffffffffU), 1.0);
}

}  // namespace
}  // namespace zitterwalk
