#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "zitterwalk/error.hpp"
#include "zitterwalk/grid.hpp"

namespace zitterwalk {
namespace {

TEST(TimeGrid, FourStepsOnUnitHorizon) {
  const auto g = make_grid(4, 1.0);
  EXPECT_EQ(g.n_points(), 5u);
  EXPECT_DOUBLE_EQ(g.dt(), 0.25);
  const double expected[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::uint64_t k = 0; k <= 4; ++k) EXPECT_EQ(g.time(k), expected[k]);
}

TEST(TimeGrid, SingleStep) {
  const auto g = make_grid(1, 1.0);
  EXPECT_EQ(g.dt(), 1.0);
  EXPECT_EQ(g.time(0), 0.0);
  EXPECT_EQ(g.time(1), 1.0);
}

TEST(TimeGrid, MillionStepsStayOnTheExactAxis) {
  const std::uint64_t n = 1'000'000;
  const auto g = make_grid(n, 1.0);
  EXPECT_DOUBLE_EQ(g.dt(), 1e-6);
  EXPECT_NEAR(g.time(n), 1.0, 1e-12);
  // k dt against (k / n) horizon, both formed independently
  double worst = 0.0;
  for (std::uint64_t k = 0; k <= n; k += 997) {
    worst = std::max(worst, std::abs(g.time(k) - static_cast<double>(k) / static_cast<double>(n)));
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_NEAR(g.time(n - 1) + g.dt(), 1.0, 1e-12);
}

TEST(TimeGrid, MonotoneAndPinned) {
  const auto g = make_grid(1000, 3.7);
  for (std::uint64_t k = 0; k < g.n_steps(); ++k) EXPECT_LT(g.time(k), g.time(k + 1));
  EXPECT_EQ(g.time(g.n_steps()), 3.7);
}

TEST(TimeGrid, RejectsInvalidParameters) {
  EXPECT_THROW(make_grid(0, 1.0), ConfigurationError);
  EXPECT_THROW(make_grid(10, 0.0), ConfigurationError);
  EXPECT_THROW(make_grid(10, -1.0), ConfigurationError);
  EXPECT_THROW(make_grid(10, std::numeric_limits<double>::infinity()), ConfigurationError);
  EXPECT_THROW(make_grid(10, std::numeric_limits<double>::quiet_NaN()), ConfigurationError);
}

TEST(TimeGrid, NearestStep) {
  const auto g = make_grid(4, 1.0);
  EXPECT_EQ(g.nearest_step(0.0), 0u);
  EXPECT_EQ(g.nearest_step(0.26), 1u);
  EXPECT_EQ(g.nearest_step(0.125), 0u);  // tie goes down
  EXPECT_EQ(g.nearest_step(1.0), 4u);
  EXPECT_THROW((void)g.nearest_step(1.5), ConfigurationError);
  EXPECT_THROW((void)g.nearest_step(-0.1), ConfigurationError);
}

}  // namespace
}  // namespace zitterwalk
