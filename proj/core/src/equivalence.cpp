#include "zitterwalk/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "zitterwalk/error.hpp"
#include "zitterwalk/summation.hpp"

namespace zitterwalk {

namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

void require_nonempty(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || b.empty()) {
    throw InsufficientDataError(std::string(what) + ": both samples must be non-empty");
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

Ensemble gaussian_reference(const CoefficientField& field, const InitialCondition& x0,
                            const TimeGrid& grid, std::uint64_t n_paths, std::uint64_t seed,
                            const SimulationOptions& options) {
  return simulate_with_noise(NoiseKind::gaussian, field, x0, grid, n_paths, seed, options);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ks_distance");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const auto na = static_cast<double>(sa.size());
  const auto nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < sa.size() || j < sb.size()) {
    // next pooled evaluation point; step both CDFs past every sample equal to it
    double v = 0.0;
    if (i == sa.size()) {
      v = sb[j];
    } else if (j == sb.size()) {
      v = sa[i];
    } else {
      v = std::min(sa[i], sb[j]);
    }
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "wasserstein1");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  if (sa.size() == sb.size()) {
    NeumaierSum total;
    for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
    return total.value() / static_cast<double>(sa.size());
  }
  // Integral of |F_a - F_b| between consecutive pooled points.
  std::vector<double> pooled;
  pooled.reserve(sa.size() + sb.size());
  std::merge(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(pooled));
  const auto na = static_cast<double>(sa.size());
  const auto nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  NeumaierSum total;
  for (std::size_t p = 0; p + 1 < pooled.size(); ++p) {
    while (i < sa.size() && sa[i] <= pooled[p]) ++i;
    while (j < sb.size() && sb[j] <= pooled[p]) ++j;
    const double gap = std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
    total += gap * (pooled[p + 1] - pooled[p]);
  }
  return total.value();
}

double ks_critical_value(std::uint64_t n, std::uint64_t m, double alpha) {
  if (n == 0 || m == 0 || !(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigurationError("ks_critical_value: need n, m >= 1 and alpha in (0, 1)");
  }
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) * std::sqrt((nd + md) / (nd * md));
}

double rademacher_lattice_ks(std::uint64_t m) {
  if (m == 0) throw ConfigurationError("rademacher_lattice_ks: m must be >= 1");
  const auto md = static_cast<double>(m);
  const double root = std::sqrt(md);
  const double log_norm = std::lgamma(md + 1.0) - md * std::numbers::ln2;
  // Number of +1 steps i gives S = 2 i - m. Outside 12 standard deviations the mass is < 1e-30.
  const double half_width = 6.0 * root;
  const auto i_lo = static_cast<std::uint64_t>(std::max(0.0, std::floor(md / 2.0 - half_width)));
  const auto i_hi = static_cast<std::uint64_t>(std::min(md, std::ceil(md / 2.0 + half_width)));
  double cdf_below = 0.0;
  double best = 0.0;
  for (std::uint64_t i = i_lo; i <= i_hi; ++i) {
    const auto id = static_cast<double>(i);
    const double pmf =
        std::exp(log_norm - std::lgamma(id + 1.0) - std::lgamma(md - id + 1.0));
    const double s = 2.0 * id - md;
    const double phi = normal_cdf(s / root);
    const double cdf_at = cdf_below + pmf;
    best = std::max({best, std::abs(cdf_at - phi), std::abs(cdf_below - phi)});
    cdf_below = cdf_at;
  }
  return best;
}

bool ComparisonReport::pass() const noexcept {
  return !points.empty() &&
         std::all_of(points.begin(), points.end(), [](const auto& p) { return p.pass; });
}

ComparisonReport equivalence_report(const Ensemble& walk, const Ensemble& reference,
                                    std::span<const double> times,
                                    const EquivalenceThresholds& thresholds) {
  const double h1 = walk.grid().horizon();
  const double h2 = reference.grid().horizon();
  if (std::abs(h1 - h2) > 1e-12 * std::max(h1, h2)) {
    throw ConfigurationError("equivalence: ensembles have different horizons");
  }
  if (times.empty()) throw ConfigurationError("equivalence: no comparison times");
  if (thresholds.ks.size() != 1 && thresholds.ks.size() != times.size()) {
    throw ConfigurationError("equivalence: need one KS threshold or one per time");
  }
  ComparisonReport report;
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double t = times[n];
    if (!std::isfinite(t) || t < 0.0 || t > h1) {
      throw ConfigurationError("equivalence: time " + std::to_string(t) + " outside [0, " +
                               std::to_string(h1) + "]");
    }
    ComparisonPoint p;
    p.requested_time = t;
    p.step = walk.grid().nearest_step(t);
    p.time = walk.grid().time(p.step);
    const auto a = walk.values_at(p.step);
    const auto b = reference.values_at(reference.grid().nearest_step(t));
    p.n_walk = a.size();
    p.n_reference = b.size();
    p.ks = ks_distance(a, b);
    p.wasserstein = wasserstein1(a, b);
    p.ks_threshold = thresholds.ks.size() == 1 ? thresholds.ks[0] : thresholds.ks[n];
    p.wasserstein_threshold = thresholds.wasserstein;
    p.pass = p.ks <= p.ks_threshold &&
             (!thresholds.wasserstein || p.wasserstein <= *thresholds.wasserstein);
    report.points.push_back(p);
  }
  return report;
}

ComparisonReport equivalence_report(const Ensemble& walk, const Ensemble& reference,
                                    std::span<const double> times, double ks_threshold) {
  return equivalence_report(walk, reference, times, EquivalenceThresholds{{ks_threshold}, {}});
}

KsCalibration calibrate_ks_threshold(const CoefficientField& field, const InitialCondition& x0,
                                     const TimeGrid& grid, std::uint64_t n_paths,
                                     std::span<const double> times, std::uint64_t n_pairs,
                                     double quantile, std::uint64_t base_seed,
                                     unsigned threads) {
  if (n_pairs == 0 || !(quantile > 0.0 && quantile <= 1.0)) {
    throw ConfigurationError("calibration: need n_pairs >= 1 and quantile in (0, 1]");
  }
  std::vector<std::uint64_t> steps;
  for (double t : times) steps.push_back(grid.nearest_step(t));
  SimulationOptions options;
  options.storage = StoragePlan::at_steps(steps, false);
  options.threads = threads;

  KsCalibration cal;
  cal.samples.assign(times.size(), {});
  for (std::uint64_t p = 0; p < n_pairs; ++p) {
    const auto a = gaussian_reference(field, x0, grid, n_paths, base_seed + 2 * p, options);
    const auto b = gaussian_reference(field, x0, grid, n_paths, base_seed + 2 * p + 1, options);
    for (std::size_t n = 0; n < steps.size(); ++n) {
      cal.samples[n].push_back(ks_distance(a.values_at(steps[n]), b.values_at(steps[n])));
    }
  }
  for (auto samples : cal.samples) {
    std::sort(samples.begin(), samples.end());
    // nearest-rank quantile
    const auto rank = static_cast<std::size_t>(
        std::ceil(quantile * static_cast<double>(samples.size())));
    cal.thresholds.push_back(samples[std::max<std::size_t>(rank, 1) - 1]);
  }
  return cal;
}

StabilityReport stability_check(const CoefficientField& field1, const CoefficientField& field2,
                                double x01, double x02, const TimeGrid& grid,
                                std::uint64_t seed, double lipschitz_bound) {
  if (!(std::isfinite(lipschitz_bound) && lipschitz_bound >= 0.0)) {
    throw ConfigurationError("stability: Lipschitz bound must be finite and >= 0");
  }
  if (!std::isfinite(x01) || !std::isfinite(x02)) {
    throw ConfigurationError("stability: initial values must be finite");
  }
  const NoiseStream stream(seed, 0);
  const std::uint64_t n = grid.n_steps();
  const double dt = grid.dt();
  const double sqrt_dt = grid.sqrt_dt();

  StabilityReport r;
  r.lipschitz_bound = lipschitz_bound;
  r.initial_gap = std::abs(x01 - x02);
  r.gaps.resize(n + 1);
  r.bounds.resize(n + 1);

  double x1 = x01;
  double x2 = x02;
  double lo = std::min(x1, x2);
  double hi = std::max(x1, x2);
  NeumaierSum gap;
  gap += x01 - x02;
  r.gaps[0] = std::abs(gap.value());
  r.sup_gap = r.gaps[0];
  r.sup_gap_naive = std::abs(x1 - x2);
  int previous = 0;
  Philox4x32::Counter block{};
  for (std::uint64_t k = 0; k < n; ++k) {
    if (k % NoiseStream::kStepsPerBlock == 0) block = stream.block(k / NoiseStream::kStepsPerBlock);
    const int eps = NoiseStream::bit_to_sign(block, k % NoiseStream::kStepsPerBlock);
    const double t = grid.time(k);
    const double b1 = field1.drift(t, x1);
    const double s1 = field1.volatility(t, x1, previous);
    const double b2 = field2.drift(t, x2);
    const double s2 = field2.volatility(t, x2, previous);
    for (double v : {b1, s1, b2, s2}) {
      if (!std::isfinite(v)) {
        throw NumericDomainError("stability: unbounded coefficient evaluation",
                                 {t, x1, k, std::uint64_t{0}});
      }
    }
    if (!(s1 > 0.0)) throw DegenerateVolatilityError(s1, {t, x1, k, std::uint64_t{0}});
    if (!(s2 > 0.0)) throw DegenerateVolatilityError(s2, {t, x2, k, std::uint64_t{0}});

    // field difference at a common point, for the Gronwall inputs
    const double db = std::abs(field1.drift(t, x2) - b2);
    const double ds = std::abs(field1.volatility(t, x2, previous) - s2);
    r.drift_gap = std::max(r.drift_gap, db);
    r.volatility_gap = std::max(r.volatility_gap, ds);

    // drift and noise parts enter the compensated sum separately: rounding their sum
    // once per step is biased and grows linearly with n
    gap += (b1 - b2) * dt;
    gap += (s1 - s2) * eps * sqrt_dt;
    x1 += walk_increment(b1, s1, eps, dt, sqrt_dt);
    x2 += walk_increment(b2, s2, eps, dt, sqrt_dt);
    if (!std::isfinite(x1) || !std::isfinite(x2)) {
      throw NumericDomainError("stability: state left the finite range",
                               {t, x1, k, std::uint64_t{0}});
    }
    lo = std::min({lo, x1, x2});
    hi = std::max({hi, x1, x2});
    r.gaps[k + 1] = std::abs(gap.value());
    if (r.gaps[k + 1] > r.sup_gap) {
      r.sup_gap = r.gaps[k + 1];
      r.sup_gap_step = k + 1;
    }
    r.sup_gap_naive = std::max(r.sup_gap_naive, std::abs(x1 - x2));
    previous = eps;
  }

  const double growth = 1.0 + lipschitz_bound * dt + lipschitz_bound * sqrt_dt;
  const double forcing = r.drift_gap * dt + r.volatility_gap * sqrt_dt;
  r.bounds[0] = r.initial_gap;
  for (std::uint64_t k = 0; k < n; ++k) r.bounds[k + 1] = r.bounds[k] * growth + forcing;
  r.gronwall_bound = r.bounds[n];
  // Both series are accumulated in floating point; allow for rounding in the comparison.
  constexpr double kRoundingSlack = 1e-12;
  for (std::uint64_t k = 0; k <= n; ++k) {
    if (r.gaps[k] > r.bounds[k] * (1.0 + kRoundingSlack)) ++r.bound_violations;
  }

  const auto probe = probe_lipschitz(field1, 0.0, grid.horizon(), lo, hi);
  r.observed_lipschitz = probe.max();
  r.lipschitz_consistent = r.observed_lipschitz <= lipschitz_bound * (1.0 + 1e-9) + 1e-12;
  r.pass = r.bound_violations == 0;
  return r;
}

}  // namespace zitterwalk
