#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "zitterwalk/error.hpp"
#include "zitterwalk/fractal.hpp"
#include "zitterwalk/walker.hpp"

namespace zitterwalk {
namespace {

Ensemble from_function(const TimeGrid& g, double (*fn)(double), double scale = 1.0) {
  std::vector<double> v(g.n_points());
  for (std::uint64_t k = 0; k < v.size(); ++k) v[k] = scale * fn(g.time(k));
  return Ensemble::from_paths({Path(g, v)}, CoefficientField::constant(1, 1));
}

std::vector<double> default_scales(const TimeGrid& g) {
  std::vector<double> s;
  for (double m : {16.0, 64.0, 256.0, 1024.0, 4096.0}) s.push_back(m * g.dt());
  return s;
}

TEST(MeanIncrement, OneStepOfTheFreeWalk) {
  const auto g = make_grid(1 << 12, 1.0);
  const auto e = simulate_ensemble(CoefficientField::constant(0, 1), InitialCondition::fixed(0), g,
                                   16, 3);
  EXPECT_DOUBLE_EQ(mean_increment(e, g.dt()), g.sqrt_dt());
}

TEST(MeanIncrement, SmoothLineMovesByDelta) {
  const auto g = make_grid(1 << 12, 1.0);
  const auto e = from_function(g, [](double t) { return t; });
  for (double d : default_scales(make_grid(1 << 14, 1.0))) {
    EXPECT_NEAR(mean_increment(e, d), d, 1e-14);
  }
}

TEST(MeanIncrement, HalfNormalAtOneHundredSteps) {
  const auto g = make_grid(10000, 1.0);
  const std::uint64_t n_paths = 400;
  const auto e = simulate_ensemble(CoefficientField::constant(0, 1), InitialCondition::fixed(0), g,
                                   n_paths, 17);
  const double delta = 100 * g.dt();
  const double sd = std::sqrt(delta);
  const double count = static_cast<double>(n_paths) * 100.0;
  const double se = sd * std::sqrt(1.0 - 2.0 / std::numbers::pi) / std::sqrt(count);
  EXPECT_NEAR(mean_increment(e, delta), std::sqrt(2.0 / std::numbers::pi) * sd, 3 * se);
}

TEST(MeanIncrement, Preconditions) {
  const auto g = make_grid(1000, 1.0);
  const auto e = from_function(g, [](double t) { return t; });
  EXPECT_THROW((void)mean_increment(e, 1.5 * g.dt()), ResolutionError);
  EXPECT_THROW((void)mean_increment(e, 0.3), ConfigurationError);
  EXPECT_THROW((void)mean_increment(e, -g.dt()), ConfigurationError);
  EXPECT_EQ(scale_steps(g, 0.25), 250u);
}

TEST(Dimension, FreeWalkIsTwo) {
  const auto g = make_grid(1 << 16, 1.0);
  const auto e = simulate_ensemble(CoefficientField::constant(0, 1), InitialCondition::fixed(0), g,
                                   64, 21, {StoragePlan::dense(), {}, 0});
  const auto est = estimate_dimension(e, default_scales(g));
  EXPECT_TRUE(est.reliable) << est.reason;
  EXPECT_GE(est.r_squared, kMinRSquared);
  EXPECT_NEAR(est.dimension, 2.0, 0.1);
  EXPECT_EQ(est.samples.size(), 5u);
  EXPECT_TRUE(est.rejected_scales.empty());
}

TEST(Dimension, OuAtSmallScalesIsTwo) {
  const auto g = make_grid(1 << 16, 1.0);
  const auto e = simulate_ensemble(CoefficientField::ou_nelson(1.0, 1.0), InitialCondition::fixed(0),
                                   g, 64, 22);
  const auto est = estimate_dimension(e, default_scales(g));
  EXPECT_TRUE(est.reliable);
  EXPECT_NEAR(est.dimension, 2.0, 0.1);
}

TEST(Dimension, SmoothCurvesAreOne) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto line = estimate_dimension(from_function(g, [](double t) { return t; }), default_scales(g));
  EXPECT_TRUE(line.reliable);
  EXPECT_NEAR(line.hurst, 1.0, 1e-12);
  EXPECT_NEAR(line.dimension, 1.0, 1e-12);
  const auto wiggle = estimate_dimension(
      from_function(g, [](double t) { return t + 0.1 * std::sin(2 * std::numbers::pi * t); }),
      default_scales(g));
  EXPECT_GE(wiggle.hurst, 0.98);
  EXPECT_LE(wiggle.hurst, 1.02);
}

TEST(Dimension, RescalingLeavesTheExponent) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto f = [](double t) { return std::sin(40 * t) + std::cos(7 * t); };
  const auto a = estimate_dimension(from_function(g, f), default_scales(g));
  const auto b = estimate_dimension(from_function(g, f, 4.0), default_scales(g));
  EXPECT_NEAR(a.hurst, b.hurst, 1e-12);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(4.0), 1e-12);
}

TEST(Dimension, ScaleOrderDoesNotMatter) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto e = simulate_ensemble(CoefficientField::constant(0, 1), InitialCondition::fixed(0), g, 4, 5);
  auto scales = default_scales(g);
  const auto a = estimate_dimension(e, scales);
  std::reverse(scales.begin(), scales.end());
  std::swap(scales[1], scales[3]);
  const auto b = estimate_dimension(e, scales);
  EXPECT_EQ(a.hurst, b.hurst);
  EXPECT_EQ(a.r_squared, b.r_squared);
}

TEST(Dimension, OutOfRangeScalesAreSetAside) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto e = from_function(g, [](double t) { return t; });
  auto scales = default_scales(g);
  scales.push_back(4 * g.dt());
  scales.push_back(0.5);
  const auto est = estimate_dimension(e, scales);
  EXPECT_EQ(est.samples.size(), 5u);
  EXPECT_EQ(est.rejected_scales.size(), 2u);
}

TEST(Dimension, Errors) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto line = from_function(g, [](double t) { return t; });
  auto scales = default_scales(g);
  scales.pop_back();
  scales.pop_back();
  EXPECT_THROW((void)estimate_dimension(line, scales), InsufficientDataError);
  const std::vector<double> narrow{16 * g.dt(), 20 * g.dt(), 24 * g.dt(), 28 * g.dt(), 32 * g.dt()};
  EXPECT_THROW((void)estimate_dimension(line, narrow), InsufficientDataError);
  auto repeated = default_scales(g);
  repeated.push_back(repeated.front());
  EXPECT_THROW((void)estimate_dimension(line, repeated), ConfigurationError);
  const auto flat = from_function(g, [](double) { return 2.0; });
  EXPECT_THROW((void)estimate_dimension(flat, default_scales(g)), NumericDomainError);
}

TEST(Dimension, StreamingMatchesStoredPaths) {
  const auto g = make_grid(1 << 14, 1.0);
  const auto scales = default_scales(g);
  IncrementScaleAccumulator acc(g, scales);
  SimulationOptions o;
  o.observers = {&acc};
  const auto e = simulate_ensemble(CoefficientField::ou_nelson(3.0, 1.0), InitialCondition::normal(0, 1),
                                   g, 12, 8, o);
  const auto stored = estimate_dimension(e, scales);
  const auto streamed = acc.estimate();
  ASSERT_EQ(streamed.samples.size(), stored.samples.size());
  for (std::size_t i = 0; i < stored.samples.size(); ++i) {
    EXPECT_EQ(streamed.samples[i].count, stored.samples[i].count);
    EXPECT_NEAR(streamed.samples[i].mean_increment, stored.samples[i].mean_increment,
                1e-14 * stored.samples[i].mean_increment);
  }
  EXPECT_NEAR(streamed.hurst, stored.hurst, 1e-12);
}

TEST(Dimension, FitOnPrecomputedSamples) {
  std::vector<ScaleSample> s;
  for (int i = 0; i < 5; ++i) {
    const double d = std::pow(10.0, -4.0 + 0.5 * i);
    s.push_back({d, 0, 3.0 * std::pow(d, 0.5), 1});
  }
  const auto est = fit_dimension(s);
  EXPECT_NEAR(est.hurst, 0.5, 1e-12);
  EXPECT_NEAR(est.dimension, 2.0, 1e-11);
  EXPECT_NEAR(est.intercept, std::log(3.0), 1e-11);
  EXPECT_NEAR(est.r_squared, 1.0, 1e-12);
  EXPECT_TRUE(est.reliable);
}

}  // namespace
}  // namespace zitterwalk
