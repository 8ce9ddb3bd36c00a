#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "zitterwalk/error.hpp"
#include "zitterwalk/estimator.hpp"
#include "zitterwalk/walker.hpp"

namespace zitterwalk {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Ensemble dense_walk(const CoefficientField& f, std::uint64_t n_steps, double horizon,
                    std::uint64_t n_paths, std::uint64_t seed, double x0 = 0.0) {
  return simulate_ensemble(f, InitialCondition::fixed(x0), make_grid(n_steps, horizon), n_paths,
                           seed);
}

// --- Heisenberg -------------------------------------------------------------

TEST(Heisenberg, FreeWalkRatiosAreOne) {
  const auto g = make_grid(100000, 1.0);
  const auto p = simulate_path(CoefficientField::constant(0, 1), 0.0, g, NoiseStream(5, 0));
  const auto r = heisenberg_check(p, 0.5, 2.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.violation_count, 0u);
  EXPECT_EQ(r.n_ratios, 100000u);
  for (double ratio : r.ratios) ASSERT_NEAR(ratio, 1.0, 8 * kEps);
  EXPECT_EQ(r.quantiles.size(), 7u);
}

TEST(Heisenberg, DriftShiftsTheRatioSlightly) {
  const auto g = make_grid(1'000'000, 1.0);
  const auto p = simulate_path(CoefficientField::constant(3, 1), 0.0, g, NoiseStream(5, 1));
  const auto r = heisenberg_check(p, 0.5, 2.0);
  EXPECT_TRUE(r.pass);
  // (3e-6 +/- 1e-3)^2 / 1e-6
  const double lo = (1e-3 - 3e-6) * (1e-3 - 3e-6) / 1e-6;
  const double hi = (1e-3 + 3e-6) * (1e-3 + 3e-6) / 1e-6;
  EXPECT_GE(r.min_ratio, lo * (1 - 1e-12));
  EXPECT_LE(r.max_ratio, hi * (1 + 1e-12));
  EXPECT_NEAR(r.min_ratio, 1.0, 6.01e-3);
  EXPECT_NEAR(r.max_ratio, 1.0, 6.01e-3);
}

TEST(Heisenberg, SmoothPathIsNotAppreciable) {
  const auto g = make_grid(1000, 1.0);
  std::vector<double> v(g.n_points());
  for (std::uint64_t k = 0; k < v.size(); ++k) v[k] = g.time(k);
  const auto r = heisenberg_check(Path(g, v), 0.1, 10.0);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.violation_count, 1000u);
  EXPECT_EQ(r.violations.size(), HeisenbergReport::kMaxListedViolations);
  EXPECT_NEAR(r.max_ratio, g.dt(), 1e-12);
}

TEST(Heisenberg, Preconditions) {
  const auto g = make_grid(10, 1.0);
  const auto thin = Path::thinned(g, {0.0, 1.0, 2.0}, 5, 0);
  EXPECT_THROW((void)heisenberg_check(thin, 0.5, 2.0), ResolutionError);
  const Path p(g, std::vector<double>(11, 0.0));
  EXPECT_THROW((void)heisenberg_check(p, 0.0, 2.0), ConfigurationError);
  EXPECT_THROW((void)heisenberg_check(p, 2.0, 1.0), ConfigurationError);
  EXPECT_THROW(HeisenbergMonitor(1.0, 1.0), ConfigurationError);
}

TEST(Heisenberg, MonitorAgreesWithPerPathChecks) {
  const auto f = CoefficientField::user([](double, double x) { return -50.0 * x; },
                                        [](double, double x) { return 0.2 + x * x; });
  const auto g = make_grid(400, 1.0);
  HeisenbergMonitor monitor(0.1, 10.0);
  SimulationOptions o;
  o.observers = {&monitor};
  const auto e = simulate_ensemble(f, InitialCondition::normal(0.0, 1.0), g, 200, 3, o);
  std::uint64_t violations = 0;
  double mn = std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto r = heisenberg_check(e.path(i), 0.1, 10.0);
    violations += r.violation_count;
    mn = std::min(mn, r.min_ratio);
  }
  const auto r = monitor.report();
  EXPECT_EQ(r.n_ratios, 200u * 400u);
  EXPECT_EQ(r.violation_count, violations);
  EXPECT_EQ(r.min_ratio, mn);
  EXPECT_GT(violations, 0u);
  EXPECT_FALSE(r.pass);
  std::uint64_t total = 0;
  for (auto c : r.histogram.counts) total += c;
  EXPECT_EQ(total, r.n_ratios);
}

// --- Decomposition ------------------------------------------------------------

// Mean of eps over the paths in each x-bin of step k, recomputed from the noise streams.
std::map<std::uint32_t, double> bin_sign_means(const DecompositionEstimate& est,
                                               const ResidualSeries& series,
                                               std::uint64_t seed) {
  std::map<std::uint32_t, double> sum;
  std::map<std::uint32_t, double> count;
  for (std::size_t i = 0; i < series.bins.size(); ++i) {
    sum[series.bins[i]] += NoiseStream(seed, i).rademacher(series.step);
    count[series.bins[i]] += 1.0;
  }
  std::map<std::uint32_t, double> out;
  for (auto& [j, s] : sum) out[j] = s / count[j];
  (void)est;
  return out;
}

TEST(Decomposition, ConstantFieldMatchesTheSignOracle) {
  const double b = 2.0;
  const double s = 1.0;
  const std::uint64_t seed = 12;
  const auto e = dense_walk(CoefficientField::constant(b, s), 4, 0.04, 100000, seed);
  const auto est = estimate_decomposition(e, 10, 30);
  ASSERT_EQ(est.residuals.size(), 4u);
  const double dt = e.grid().dt();
  for (const auto& series : est.residuals) {
    const auto m = bin_sign_means(est, series, seed);
    for (const auto& c : est.cells) {
      if (c.step != series.step || !c.determined) continue;
      const double mean_eps = m.at(c.bin);
      // b_hat = b + s mean(eps) / sqrt(dt), s_hat = s sqrt(1 - mean(eps)^2)
      EXPECT_NEAR(c.drift, b + s * mean_eps / std::sqrt(dt), 1e-9);
      EXPECT_NEAR(c.volatility, s * std::sqrt(1.0 - mean_eps * mean_eps), 1e-9);
      // and the drift sits inside its sampling interval
      EXPECT_LE(std::abs(c.drift - b), 4.0 * s / std::sqrt(static_cast<double>(c.count) * dt));
      EXPECT_GT(c.volatility, 0.0);
      EXPECT_FALSE(c.degenerate);
    }
  }
}

TEST(Decomposition, ResidualsAreTwoValuedAndCarryTheSign) {
  const std::uint64_t seed = 4;
  const auto e = dense_walk(CoefficientField::constant(0.5, 1.5), 3, 0.03, 20000, seed);
  const auto est = estimate_decomposition(e, 5, 30);
  for (const auto& series : est.residuals) {
    const auto m = bin_sign_means(est, series, seed);
    for (std::size_t i = 0; i < series.eta.size(); ++i) {
      const double eta = series.eta[i];
      if (std::isnan(eta)) continue;
      const int eps = NoiseStream(seed, i).rademacher(series.step);
      const double mean_eps = m.at(series.bins[i]);
      const double expected = (eps - mean_eps) / std::sqrt(1.0 - mean_eps * mean_eps);
      ASSERT_NEAR(eta, expected, 1e-8);
      ASSERT_EQ(eta > 0.0 ? 1 : -1, eps);
    }
  }
  for (const auto& mom : residual_moments(est)) {
    EXPECT_NEAR(mom.square_mean, 1.0, 1e-10);
    EXPECT_NEAR(mom.mean, 0.0, 1e-10);
    EXPECT_TRUE(mom.within_tolerance);
  }
}

TEST(Decomposition, TrueCoefficientsRecoverTheDrivingSigns) {
  const auto g = make_grid(5000, 1.0);
  const auto f = CoefficientField::constant(-0.7, 2.0);
  const NoiseStream stream(8, 3);
  const auto p = simulate_path(f, 1.0, g, stream);
  const auto eta = standardized_noise(p, f);
  for (std::uint64_t k = 0; k < g.n_steps(); ++k) {
    ASSERT_NEAR(eta[k], stream.rademacher(k), 1e-8);
  }
}

TEST(Decomposition, ReconstructsEveryIncrement) {
  const auto f = CoefficientField::ou_nelson(1.0, 1.0);
  const auto e = dense_walk(f, 20, 1.0, 5000, 6, 0.3);
  const auto est = estimate_decomposition(e, 8, 30);
  std::map<std::pair<std::uint64_t, std::uint32_t>, const DecompositionCell*> cell;
  for (const auto& c : est.cells) cell[{c.step, c.bin}] = &c;
  const double dt = e.grid().dt();
  for (const auto& series : est.residuals) {
    for (std::size_t i = 0; i < series.eta.size(); ++i) {
      if (std::isnan(series.eta[i])) continue;
      const auto* c = cell.at({series.step, series.bins[i]});
      const double drift_part = c->drift * dt;
      const double noise_part = c->volatility * std::sqrt(dt) * series.eta[i];
      const double rebuilt = drift_part + noise_part;
      const double scale = std::abs(drift_part) + std::abs(noise_part);
      ASSERT_NEAR(rebuilt, series.increments[i], 8 * kEps * scale);
    }
  }
}

TEST(Decomposition, OuDriftMatchesTheBinMeans) {
  const double omega = 1.0;
  const auto e = dense_walk(CoefficientField::ou_nelson(omega, 1.0), 50, 1.0, 40000, 31, 0.0);
  const auto est = estimate_decomposition(e, 12, 200, {5, false});
  std::size_t checked = 0;
  for (const auto& c : est.cells) {
    if (!c.determined) continue;
    // E[dx | x] = -omega x dt, so the bin estimate targets -omega * mean_x
    const double sd = c.volatility / std::sqrt(static_cast<double>(c.count) * est.dt);
    EXPECT_LE(std::abs(c.drift + omega * c.mean_x), 5.0 * sd);
    ++checked;
  }
  EXPECT_GT(checked, 50u);
  const auto fit = drift_regression(est);
  EXPECT_LE(std::abs(fit.slope + omega), 4.0 * fit.slope_standard_error + 0.03);
}

TEST(Decomposition, DriftErrorShrinksWithMorePaths) {
  const double omega = 1.0;
  std::vector<double> medians;
  for (std::uint64_t n : {1000u, 10000u, 100000u}) {
    const auto e = dense_walk(CoefficientField::ou_nelson(omega, 1.0), 10, 1.0, n, 77, 0.0);
    const auto est = estimate_decomposition(e, 10, 30, {1, false});
    std::vector<double> err;
    for (const auto& c : est.cells) {
      if (c.determined) err.push_back(std::abs(c.drift + omega * c.center));
    }
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    medians.push_back(err[err.size() / 2]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(Decomposition, DuplicatedDeterministicPathIsDegenerate) {
  const auto g = make_grid(5, 1.0);
  std::vector<Path> paths;
  for (std::uint64_t i = 0; i < 40; ++i) paths.emplace_back(g, std::vector<double>{0, 1, 2, 3, 4, 5}, i);
  const auto e = Ensemble::from_paths(paths, CoefficientField::constant(1, 1));
  const auto est = estimate_decomposition(e, 4, 30);
  EXPECT_EQ(est.determined_cells(), 5u);
  EXPECT_EQ(est.degenerate_cells(), 5u);
  for (const auto& c : est.cells) {
    if (c.determined) EXPECT_NEAR(c.volatility, 0.0, 1e-12);
  }
  EXPECT_THROW((void)residual_moments(est), InsufficientDataError);
}

TEST(Decomposition, SmallBinOfFairSigns) {
  const auto e = dense_walk(CoefficientField::constant(0, 1), 1, 1.0, 30, 2);
  const auto est = estimate_decomposition(e, 1, 30);
  const auto moments = residual_moments(est);
  ASSERT_EQ(moments.size(), 1u);
  EXPECT_EQ(moments[0].count, 30u);
  EXPECT_LE(std::abs(moments[0].mean), 4.0 / std::sqrt(30.0));
  EXPECT_TRUE(moments[0].within_tolerance);
}

TEST(Decomposition, UndeterminedBinsAreNotExtrapolated) {
  const auto e = dense_walk(CoefficientField::constant(0, 1), 4, 1.0, 200, 2);
  const auto est = estimate_decomposition(e, 50, 100);
  for (const auto& c : est.cells) {
    if (!c.determined) {
      EXPECT_TRUE(std::isnan(c.drift));
      EXPECT_TRUE(std::isnan(c.volatility));
    }
  }
}

TEST(Decomposition, Preconditions) {
  const auto e = dense_walk(CoefficientField::constant(0, 1), 4, 1.0, 1, 2);
  EXPECT_THROW((void)estimate_decomposition(e, 4, 30), InsufficientDataError);
  const auto e2 = dense_walk(CoefficientField::constant(0, 1), 4, 1.0, 100, 2);
  EXPECT_THROW((void)estimate_decomposition(e2, 0, 30), ConfigurationError);
  EXPECT_THROW((void)estimate_decomposition(e2, 4, 29), ConfigurationError);
  SimulationOptions o;
  o.storage = StoragePlan::thinned(2);
  const auto thin = simulate_ensemble(CoefficientField::constant(0, 1), InitialCondition::fixed(0),
                                      make_grid(4, 1.0), 100, 2, o);
  EXPECT_THROW((void)estimate_decomposition(thin, 4, 30), ResolutionError);
  DecompositionEstimate empty;
  EXPECT_THROW((void)residual_moments(empty), InsufficientDataError);
  EXPECT_THROW((void)drift_regression(empty), InsufficientDataError);
}

TEST(Decomposition, InsensitiveToPathOrder) {
  const auto f = CoefficientField::ou_nelson(2.0, 0.8);
  const auto e = dense_walk(f, 10, 1.0, 3000, 13, 0.5);
  std::vector<Path> reversed;
  for (std::uint64_t i = e.n_paths(); i-- > 0;) reversed.push_back(e.path(i));
  const auto r = Ensemble::from_paths(reversed, f);
  const auto a = estimate_decomposition(e, 6, 30, {1, false});
  const auto b = estimate_decomposition(r, 6, 30, {1, false});
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& ca = a.cells[i];
    const auto& cb = b.cells[i];
    EXPECT_EQ(ca.count, cb.count);
    if (!ca.determined) continue;
    EXPECT_NEAR(ca.drift, cb.drift, 1e-10 * std::abs(ca.drift) + 1e-300);
    EXPECT_NEAR(ca.volatility, cb.volatility, 1e-10 * ca.volatility);
  }
}

TEST(Decomposition, StreamingMatchesReplay) {
  const auto f = CoefficientField::ou_nelson(1.0, 1.0);
  const auto g = make_grid(30, 1.0);
  DecompositionAccumulator acc(8, 50, {3, false});
  SimulationOptions o;
  o.observers = {&acc};
  const auto e = simulate_ensemble(f, InitialCondition::fixed(0.1), g, 2000, 5, o);
  const auto replayed = estimate_decomposition(e, 8, 50, {3, false});
  const auto& streamed = acc.estimate();
  ASSERT_EQ(streamed.cells.size(), replayed.cells.size());
  EXPECT_EQ(streamed.cells.size(), 10u * 8u);
  for (std::size_t i = 0; i < replayed.cells.size(); ++i) {
    EXPECT_EQ(streamed.cells[i].count, replayed.cells[i].count);
    if (replayed.cells[i].determined) {
      EXPECT_EQ(streamed.cells[i].drift, replayed.cells[i].drift);
    }
  }
}

// --- Markov diagnostic ----------------------------------------------------------

CoefficientField sign_memory_field() {
  return CoefficientField::history_dependent(
      [](double, double x) { return -x; },
      [](double, double, int prev) { return prev < 0 ? 1.5 : 1.0; });
}

TEST(Markov, OuIsConsistent) {
  const auto e = dense_walk(CoefficientField::ou_nelson(1.0, 1.0), 40, 1.0, 10000, 19, 0.0);
  const auto r = markov_diagnostic(e, 10);
  EXPECT_EQ(r.verdict, MarkovVerdict::consistent) << r.reason;
  EXPECT_GT(r.cells_tested, 0u);
  EXPECT_GT(r.z_threshold, 4.0);
  ASSERT_TRUE(r.worst_cell.has_value());
  EXPECT_LE(r.worst_cell->worst(), r.z_threshold);
}

TEST(Markov, SignMemoryIsFlagged) {
  const auto e = dense_walk(sign_memory_field(), 40, 1.0, 10000, 19, 0.0);
  const auto r = markov_diagnostic(e, 10);
  EXPECT_EQ(r.verdict, MarkovVerdict::violated);
  EXPECT_GT(r.flagged_cells, 0u);
}

TEST(Markov, TooFewPathsIsUndetermined) {
  const auto e = dense_walk(CoefficientField::ou_nelson(1.0, 1.0), 10, 1.0, 10, 19, 0.0);
  const auto r = markov_diagnostic(e, 4);
  EXPECT_EQ(r.verdict, MarkovVerdict::undetermined);
  EXPECT_FALSE(r.reason.empty());
}

TEST(Markov, BonferroniThreshold) {
  // family-wise two-sided 4 sigma, split over n tests
  const double tail = std::erfc(4.0 / std::sqrt(2.0));
  EXPECT_NEAR(two_sided_normal_quantile(tail), 4.0, 1e-9);
  const double z = two_sided_normal_quantile(tail / 1000.0);
  EXPECT_NEAR(std::erfc(z / std::sqrt(2.0)), tail / 1000.0, 1e-12 * tail);
  EXPECT_THROW((void)two_sided_normal_quantile(0.0), ConfigurationError);
}

}  // namespace
}  // namespace zitterwalk
