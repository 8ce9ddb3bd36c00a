#include "zitterwalk/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "zitterwalk/error.hpp"
#include "zitterwalk/summation.hpp"

namespace zitterwalk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_band(double k_low, double k_high) {
  if (!(std::isfinite(k_low) && std::isfinite(k_high) && k_low > 0.0 && k_low < k_high)) {
    throw ConfigurationError("Heisenberg band needs 0 < k_low < k_high");
  }
}

void record_ratio(HeisenbergReport& r, double ratio, std::uint64_t step, std::uint64_t path_id) {
  if (r.n_ratios == 0) {
    r.min_ratio = ratio;
    r.max_ratio = ratio;
  } else {
    r.min_ratio = std::min(r.min_ratio, ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
  }
  ++r.n_ratios;
  r.histogram.add(ratio);
  if (!(ratio >= r.k_low && ratio <= r.k_high)) {
    ++r.violation_count;
    if (r.violations.size() < HeisenbergReport::kMaxListedViolations) {
      r.violations.push_back({step, path_id, ratio});
    }
  }
}

// Equal-width bins over [lo, hi]; a zero-width range maps everything to bin 0.
struct Binning {
  double lo = 0.0;
  double hi = 0.0;
  double width = 0.0;
  std::uint32_t n = 1;

  Binning(std::span<const double> xs, std::uint32_t bins) : n(bins) {
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    lo = *mn;
    hi = *mx;
    width = (hi - lo) / n;
  }

  [[nodiscard]] std::uint32_t operator()(double x) const noexcept {
    if (!(width > 0.0)) return 0;
    const auto j = static_cast<std::int64_t>((x - lo) / width);
    return static_cast<std::uint32_t>(std::clamp<std::int64_t>(j, 0, n - 1));
  }
  [[nodiscard]] double lower(std::uint32_t j) const noexcept { return lo + width * j; }
  [[nodiscard]] double upper(std::uint32_t j) const noexcept {
    return j + 1 == n ? hi : lo + width * (j + 1);
  }
};

}  // namespace

void RatioHistogram::add(double ratio) noexcept {
  int bin = 0;
  if (ratio > 0.0) {
    // floor(log2(ratio)) is the unbiased exponent for normal numbers; subnormals and
    // infinity fall outside the covered range either way
    const auto biased = static_cast<int>((std::bit_cast<std::uint64_t>(ratio) >> 52) & 0x7ff);
    bin = biased == 0x7ff ? kBins - 1 : biased - 1023 - kMinExponent;
  }
  counts[static_cast<std::size_t>(std::clamp(bin, 0, kBins - 1))]++;
}

double RatioHistogram::lower_edge(int bin) noexcept {
  return std::ldexp(1.0, bin + kMinExponent);
}

HeisenbergReport heisenberg_check(const Path& path, double k_low, double k_high) {
  check_band(k_low, k_high);
  if (!path.dense()) {
    throw ResolutionError("Heisenberg check needs every increment; path is thinned");
  }
  HeisenbergReport r;
  r.k_low = k_low;
  r.k_high = k_high;
  const double dt = path.grid().dt();
  const auto increments = path.increments();
  r.ratios.resize(increments.size());
  for (std::size_t k = 0; k < increments.size(); ++k) {
    const double ratio = increments[k] * increments[k] / dt;
    r.ratios[k] = ratio;
    record_ratio(r, ratio, k, path.path_id());
  }
  std::vector<double> sorted = r.ratios;
  std::sort(sorted.begin(), sorted.end());
  for (double level : {0.0, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0}) {
    const auto idx = static_cast<std::size_t>(std::round(level * (sorted.size() - 1)));
    r.quantiles.push_back(sorted[idx]);
  }
  r.pass = r.n_ratios > 0 && r.violation_count == 0;
  return r;
}

HeisenbergMonitor::HeisenbergMonitor(double k_low, double k_high) {
  check_band(k_low, k_high);
  report_.k_low = k_low;
  report_.k_high = k_high;
}

void HeisenbergMonitor::observe(const CrossSection& cs) {
  const auto inc = cs.increments;
  if (inc.empty()) return;
  const double dt = cs.dt;
  const double lo = report_.k_low;
  const double hi = report_.k_high;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -mn;
  std::uint64_t outside = 0;
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const double r = inc[i] * inc[i] / dt;
    mn = std::min(mn, r);
    mx = std::max(mx, r);
    outside += (r >= lo && r <= hi) ? 0 : 1;
    report_.histogram.add(r);
  }
  if (report_.n_ratios == 0) {
    report_.min_ratio = mn;
    report_.max_ratio = mx;
  } else {
    report_.min_ratio = std::min(report_.min_ratio, mn);
    report_.max_ratio = std::max(report_.max_ratio, mx);
  }
  report_.n_ratios += inc.size();
  if (outside == 0) return;
  report_.violation_count += outside;
  for (std::size_t i = 0; i < inc.size() && report_.violations.size() < HeisenbergReport::kMaxListedViolations;
       ++i) {
    const double r = inc[i] * inc[i] / dt;
    if (!(r >= lo && r <= hi)) report_.violations.push_back({cs.step, i, r});
  }
}

HeisenbergReport HeisenbergMonitor::report() const {
  HeisenbergReport r = report_;
  r.pass = r.n_ratios > 0 && r.violation_count == 0;
  return r;
}

std::uint64_t DecompositionEstimate::determined_cells() const noexcept {
  return static_cast<std::uint64_t>(
      std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.determined; }));
}

std::uint64_t DecompositionEstimate::degenerate_cells() const noexcept {
  return static_cast<std::uint64_t>(
      std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.degenerate; }));
}

DecompositionAccumulator::DecompositionAccumulator(std::uint32_t n_xbins, std::uint64_t min_count,
                                                   DecompositionOptions options)
    : n_xbins_(n_xbins), min_count_(min_count), options_(options) {
  if (n_xbins == 0) throw ConfigurationError("n_xbins must be >= 1");
  if (min_count < 30) throw ConfigurationError("min_count must be >= 30");
  if (options_.step_stride == 0) throw ConfigurationError("step stride must be >= 1");
  estimate_.n_xbins = n_xbins;
  estimate_.min_count = min_count;
}

void DecompositionAccumulator::observe(const CrossSection& cs) {
  if (cs.increments.empty() || cs.step % options_.step_stride != 0) return;
  const std::size_t n = cs.values.size();
  if (n < 2) throw InsufficientDataError("decomposition needs at least 2 paths");
  estimate_.dt = cs.dt;
  estimate_.n_paths = n;

  const Binning binning(cs.values, n_xbins_);
  bin_of_.resize(n);
  std::vector<std::uint64_t> count(n_xbins_, 0);
  std::vector<NeumaierSum> sum_x(n_xbins_), sum_dx(n_xbins_), sum_dx2(n_xbins_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t j = binning(cs.values[i]);
    bin_of_[i] = j;
    ++count[j];
    sum_x[j] += cs.values[i];
    sum_dx[j] += cs.increments[i];
    sum_dx2[j] += cs.increments[i] * cs.increments[i];
  }

  std::vector<DecompositionCell> cells(n_xbins_);
  std::vector<double> drift_dt(n_xbins_, 0.0);
  for (std::uint32_t j = 0; j < n_xbins_; ++j) {
    auto& c = cells[j];
    c.step = cs.step;
    c.time = cs.t;
    c.bin = j;
    c.lower = binning.lower(j);
    c.upper = binning.upper(j);
    c.center = 0.5 * (c.lower + c.upper);
    c.count = count[j];
    c.mean_x = count[j] > 0 ? sum_x[j].value() / static_cast<double>(count[j]) : kNaN;
    c.determined = count[j] >= min_count_;
    c.drift = c.volatility = c.eta_mean = c.eta_square_mean = kNaN;
    if (c.determined) {
      c.drift = sum_dx[j].value() / static_cast<double>(count[j]) / cs.dt;
      drift_dt[j] = c.drift * cs.dt;
    }
  }

  std::vector<NeumaierSum> spread(n_xbins_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t j = bin_of_[i];
    if (!cells[j].determined) continue;
    const double r = cs.increments[i] - drift_dt[j];
    spread[j] += r * r;
  }
  const double sqrt_dt = std::sqrt(cs.dt);
  std::vector<double> scale(n_xbins_, 0.0);
  for (std::uint32_t j = 0; j < n_xbins_; ++j) {
    auto& c = cells[j];
    if (!c.determined) continue;
    const auto cnt = static_cast<double>(c.count);
    c.volatility = std::sqrt(spread[j].value() / cnt / cs.dt);
    // Residual spread at rounding level relative to the increments themselves.
    const double floor =
        8.0 * std::numeric_limits<double>::epsilon() * std::sqrt(sum_dx2[j].value() / cnt / cs.dt);
    c.degenerate = !(c.volatility > floor);
    scale[j] = c.volatility * sqrt_dt;
  }

  ResidualSeries series;
  if (options_.keep_residuals) {
    series.step = cs.step;
    series.bins = bin_of_;
    series.eta.assign(n, kNaN);
    series.increments.assign(cs.increments.begin(), cs.increments.end());
  }
  std::vector<NeumaierSum> eta_sum(n_xbins_), eta_sq(n_xbins_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t j = bin_of_[i];
    if (!cells[j].determined || cells[j].degenerate) continue;
    const double eta = (cs.increments[i] - drift_dt[j]) / scale[j];
    eta_sum[j] += eta;
    eta_sq[j] += eta * eta;
    if (options_.keep_residuals) series.eta[i] = eta;
  }
  for (std::uint32_t j = 0; j < n_xbins_; ++j) {
    auto& c = cells[j];
    if (!c.determined || c.degenerate) continue;
    c.eta_mean = eta_sum[j].value() / static_cast<double>(c.count);
    c.eta_square_mean = eta_sq[j].value() / static_cast<double>(c.count);
  }
  estimate_.cells.insert(estimate_.cells.end(), cells.begin(), cells.end());
  if (options_.keep_residuals) estimate_.residuals.push_back(std::move(series));
}

DecompositionEstimate estimate_decomposition(const Ensemble& ensemble, std::uint32_t n_xbins,
                                             std::uint64_t min_count,
                                             DecompositionOptions options) {
  DecompositionAccumulator acc(n_xbins, min_count, options);
  if (ensemble.n_paths() < 2) {
    throw InsufficientDataError("decomposition needs at least 2 paths");
  }
  ensemble.replay(acc);
  return acc.take();
}

std::vector<ResidualMoment> residual_moments(const DecompositionEstimate& estimate) {
  std::vector<ResidualMoment> out;
  for (const auto& c : estimate.cells) {
    if (!c.determined || c.degenerate) continue;
    ResidualMoment m;
    m.step = c.step;
    m.time = c.time;
    m.bin = c.bin;
    m.count = c.count;
    m.mean = c.eta_mean;
    m.square_mean = c.eta_square_mean;
    const double root = std::sqrt(static_cast<double>(c.count));
    m.within_tolerance =
        std::abs(m.mean) <= 4.0 / root && std::abs(m.square_mean - 1.0) <= 8.0 / root;
    out.push_back(m);
  }
  if (out.empty()) throw InsufficientDataError("decomposition has no determined bins");
  return out;
}

LinearFit drift_regression(const DecompositionEstimate& estimate) {
  NeumaierSum sw, swx, swy;
  std::uint64_t points = 0;
  for (const auto& c : estimate.cells) {
    if (!c.determined || c.degenerate) continue;
    const auto w = static_cast<double>(c.count);
    sw += w;
    swx += w * c.center;
    swy += w * c.drift;
    ++points;
  }
  if (points < 2) throw InsufficientDataError("drift regression needs >= 2 determined cells");
  const double mx = swx.value() / sw.value();
  const double my = swy.value() / sw.value();
  NeumaierSum sxx, sxy;
  for (const auto& c : estimate.cells) {
    if (!c.determined || c.degenerate) continue;
    const auto w = static_cast<double>(c.count);
    sxx += w * (c.center - mx) * (c.center - mx);
    sxy += w * (c.center - mx) * (c.drift - my);
  }
  if (!(sxx.value() > 0.0)) throw InsufficientDataError("drift regression: bin centres coincide");
  LinearFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  fit.points = points;
  fit.total_weight = sw.value();
  // Each cell's drift estimate has variance ~ s^2 / (count dt).
  NeumaierSum noise;
  for (const auto& c : estimate.cells) {
    if (!c.determined || c.degenerate) continue;
    const auto w = static_cast<double>(c.count);
    const double var = c.volatility * c.volatility / (w * estimate.dt);
    noise += w * w * (c.center - mx) * (c.center - mx) * var;
  }
  fit.slope_standard_error = std::sqrt(noise.value()) / sxx.value();
  return fit;
}

std::vector<double> standardized_noise(const Path& path, const CoefficientField& field) {
  if (!path.dense()) throw ResolutionError("standardized noise needs a dense path");
  const auto& grid = path.grid();
  std::vector<double> eta(grid.n_steps());
  int previous = 0;
  for (std::uint64_t k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.time(k);
    const double x = path.values()[k];
    const double b = field.drift(t, x);
    const double s = field.volatility(t, x, previous);
    if (!(s > 0.0)) throw DegenerateVolatilityError(s, {t, x, k, path.path_id()});
    eta[k] = (path.increments()[k] - b * grid.dt()) / (s * grid.sqrt_dt());
    previous = eta[k] >= 0.0 ? 1 : -1;
  }
  return eta;
}

const char* to_string(MarkovVerdict verdict) noexcept {
  switch (verdict) {
    case MarkovVerdict::consistent: return "consistent";
    case MarkovVerdict::violated: return "violated";
    case MarkovVerdict::undetermined: return "undetermined";
  }
  return "undetermined";
}

double MarkovCellTest::worst() const noexcept {
  return std::max(std::abs(z_mean), std::abs(z_second_moment));
}

double two_sided_normal_quantile(double tail_probability) {
  if (!(tail_probability > 0.0 && tail_probability < 1.0)) {
    throw ConfigurationError("tail probability must lie in (0, 1)");
  }
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail_probability) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MarkovAccumulator::MarkovAccumulator(std::uint32_t n_xbins, MarkovOptions options)
    : n_xbins_(n_xbins), options_(options) {
  if (n_xbins == 0) throw ConfigurationError("n_xbins must be >= 1");
  if (options_.step_stride == 0) throw ConfigurationError("step stride must be >= 1");
  if (options_.min_group_count < 2) throw ConfigurationError("min_group_count must be >= 2");
}

namespace {

// z for the difference of two sample means given their sample variances.
double two_sample_z(double m1, double v1, double n1, double m2, double v2, double n2) {
  const double se = std::sqrt(v1 / n1 + v2 / n2);
  const double diff = m1 - m2;
  if (se > 0.0) return diff / se;
  if (diff == 0.0) return 0.0;
  return diff > 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
}

}  // namespace

void MarkovAccumulator::observe(const CrossSection& cs) {
  n_paths_ = cs.values.size();
  if (cs.increments.empty() || cs.previous_increments.empty()) return;
  if (cs.step % options_.step_stride != 0) return;
  if (n_paths_ < options_.min_paths) return;
  ++steps_;

  const std::size_t n = cs.values.size();
  const Binning binning(cs.values, n_xbins_);
  const double inv_sqrt_dt = 1.0 / std::sqrt(cs.dt);
  // group index: 2 * bin + (previous increment < 0)
  const std::size_t groups = 2 * static_cast<std::size_t>(n_xbins_);
  std::vector<std::uint64_t> count(groups, 0);
  std::vector<NeumaierSum> sum_u(groups), sum_u2(groups);
  bin_of_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = cs.previous_increments[i];
    if (prev == 0.0) {
      bin_of_[i] = std::numeric_limits<std::uint32_t>::max();
      continue;
    }
    const std::uint32_t g = 2 * binning(cs.values[i]) + (prev < 0.0 ? 1U : 0U);
    bin_of_[i] = g;
    const double u = cs.increments[i] * inv_sqrt_dt;
    ++count[g];
    sum_u[g] += u;
    sum_u2[g] += u * u;
  }
  std::vector<double> mean(groups, 0.0), second(groups, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    if (count[g] == 0) continue;
    mean[g] = sum_u[g].value() / static_cast<double>(count[g]);
    second[g] = sum_u2[g].value() / static_cast<double>(count[g]);
  }
  std::vector<NeumaierSum> dev_u(groups), dev_u2(groups);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t g = bin_of_[i];
    if (g == std::numeric_limits<std::uint32_t>::max()) continue;
    const double u = cs.increments[i] * inv_sqrt_dt;
    dev_u[g] += (u - mean[g]) * (u - mean[g]);
    dev_u2[g] += (u * u - second[g]) * (u * u - second[g]);
  }
  for (std::uint32_t j = 0; j < n_xbins_; ++j) {
    const std::size_t up = 2 * j;
    const std::size_t down = up + 1;
    if (count[up] + count[down] == 0) continue;
    if (count[up] < options_.min_group_count || count[down] < options_.min_group_count) {
      ++skipped_;
      continue;
    }
    const auto nu = static_cast<double>(count[up]);
    const auto nd = static_cast<double>(count[down]);
    MarkovCellTest t;
    t.step = cs.step;
    t.time = cs.t;
    t.bin = j;
    t.n_up = count[up];
    t.n_down = count[down];
    t.z_mean = two_sample_z(mean[up], dev_u[up].value() / nu, nu, mean[down],
                            dev_u[down].value() / nd, nd);
    t.z_second_moment = two_sample_z(second[up], dev_u2[up].value() / nu, nu, second[down],
                                     dev_u2[down].value() / nd, nd);
    tests_.push_back(t);
  }
}

MarkovReport MarkovAccumulator::report() const {
  MarkovReport r;
  r.n_paths = n_paths_;
  r.steps_analysed = steps_;
  r.cells_tested = tests_.size();
  r.cells_skipped = skipped_;
  r.n_tests = 2 * tests_.size();
  if (n_paths_ < options_.min_paths) {
    r.verdict = MarkovVerdict::undetermined;
    r.reason = "needs at least " + std::to_string(options_.min_paths) + " paths, got " +
               std::to_string(n_paths_);
    return r;
  }
  if (tests_.empty()) {
    r.verdict = MarkovVerdict::undetermined;
    r.reason = "no (t, x) cell reached the minimum occupancy in both sign groups";
    return r;
  }
  const double family_tail = std::erfc(options_.sigmas / std::sqrt(2.0));
  r.z_threshold = two_sided_normal_quantile(family_tail / static_cast<double>(r.n_tests));
  for (const auto& t : tests_) {
    if (!r.worst_cell || t.worst() > r.worst_cell->worst()) r.worst_cell = t;
    if (t.worst() > r.z_threshold) {
      ++r.flagged_cells;
      if (r.flagged.size() < MarkovReport::kMaxListedCells) r.flagged.push_back(t);
    }
  }
  r.verdict = r.flagged_cells == 0 ? MarkovVerdict::consistent : MarkovVerdict::violated;
  return r;
}

MarkovReport markov_diagnostic(const Ensemble& ensemble, std::uint32_t n_xbins,
                               MarkovOptions options) {
  MarkovAccumulator acc(n_xbins, options);
  if (ensemble.n_paths() < options.min_paths) {
    // Not enough paths to say anything; the verdict is undetermined, not a failure.
    MarkovReport r;
    r.n_paths = ensemble.n_paths();
    r.reason = "needs at least " + std::to_string(options.min_paths) + " paths, got " +
               std::to_string(ensemble.n_paths());
    return r;
  }
  ensemble.replay(acc);
  return acc.report();
}

}  // namespace zitterwalk
