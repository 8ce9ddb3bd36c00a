#include "zitterwalk/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "zitterwalk/error.hpp"

namespace zitterwalk {

namespace {

bool in_fit_range(const TimeGrid& grid, std::uint64_t steps) {
  const auto n = grid.n_steps();
  return steps >= kMinScaleSteps &&
         static_cast<double>(steps) <= kMaxScaleFraction * static_cast<double>(n);
}

void check_quarter_horizon(const TimeGrid& grid, std::uint64_t steps, double delta) {
  if (static_cast<double>(steps) > kMaxScaleFraction * static_cast<double>(grid.n_steps())) {
    std::ostringstream msg;
    msg << "scale " << delta << " exceeds horizon / 4";
    throw ConfigurationError(msg.str());
  }
}

}  // namespace

std::uint64_t scale_steps(const TimeGrid& grid, double delta) {
  if (!std::isfinite(delta) || delta <= 0.0 || delta > grid.horizon()) {
    std::ostringstream msg;
    msg << "scale " << delta << " outside (0, " << grid.horizon() << "]";
    throw ConfigurationError(msg.str());
  }
  const double ratio = delta / grid.dt();
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    std::ostringstream msg;
    msg << "scale " << delta << " is not a multiple of dt = " << grid.dt();
    throw ResolutionError(msg.str());
  }
  return static_cast<std::uint64_t>(rounded);
}

double mean_increment(const Ensemble& ensemble, double delta) {
  const auto& grid = ensemble.grid();
  const auto m = scale_steps(grid, delta);
  check_quarter_horizon(grid, m, delta);
  const auto windows = grid.n_steps() / m;
  NeumaierSum sum;
  if (m == 1 && ensemble.dense()) {
    for (std::uint64_t k = 0; k < windows; ++k) {
      for (double d : ensemble.increments_at(k)) sum += std::abs(d);
    }
  } else {
    auto start = ensemble.values_at(0);
    for (std::uint64_t j = 1; j <= windows; ++j) {
      const auto end = ensemble.values_at(j * m);
      for (std::size_t i = 0; i < end.size(); ++i) sum += std::abs(end[i] - start[i]);
      start = end;
    }
  }
  return sum.value() / static_cast<double>(windows * ensemble.n_paths());
}

DimensionEstimate fit_dimension(std::vector<ScaleSample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.scale < b.scale; });
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].scale == samples[i - 1].scale) {
      throw ConfigurationError("dimension fit: repeated scale " +
                               std::to_string(samples[i].scale));
    }
  }
  if (samples.size() < kMinScales) {
    throw InsufficientDataError("dimension fit: need at least 4 valid scales, got " +
                                std::to_string(samples.size()));
  }
  const double decades = std::log10(samples.back().scale / samples.front().scale);
  if (decades < kMinScaleDecades) {
    throw InsufficientDataError("dimension fit: scales span " + std::to_string(decades) +
                                " decades, need 1.5");
  }
  for (const auto& s : samples) {
    if (!(s.mean_increment > 0.0) || !std::isfinite(s.mean_increment)) {
      throw NumericDomainError("dimension fit: mean increment is not positive",
                               {s.scale, s.mean_increment, {}, {}});
    }
  }

  const auto n = static_cast<double>(samples.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& s : samples) {
    mx += std::log(s.scale);
    my += std::log(s.mean_increment);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& s : samples) {
    const double dx = std::log(s.scale) - mx;
    const double dy = std::log(s.mean_increment) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) {
    throw NumericDomainError("dimension fit: zero variance in log scale", {mx, my, {}, {}});
  }

  DimensionEstimate e;
  e.hurst = sxy / sxx;
  e.intercept = my - e.hurst * mx;
  double ss_res = 0.0;
  for (const auto& s : samples) {
    const double r = std::log(s.mean_increment) - (e.hurst * std::log(s.scale) + e.intercept);
    ss_res += r * r;
  }
  e.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 0.0;
  e.dimension = 1.0 / e.hurst;
  e.scale_min = samples.front().scale;
  e.scale_max = samples.back().scale;
  e.samples = std::move(samples);
  if (!(e.hurst > 0.0)) {
    e.reason = "non-positive scaling exponent";
  } else if (e.r_squared < kMinRSquared) {
    e.reason = "R^2 below 0.99";
  }
  e.reliable = e.reason.empty();
  return e;
}

DimensionEstimate estimate_dimension(const Ensemble& ensemble, std::span<const double> scales) {
  const auto& grid = ensemble.grid();
  std::vector<ScaleSample> samples;
  std::vector<double> rejected;
  for (double delta : scales) {
    const auto m = scale_steps(grid, delta);
    if (!in_fit_range(grid, m)) {
      rejected.push_back(delta);
      continue;
    }
    const auto windows = grid.n_steps() / m;
    samples.push_back({delta, m, mean_increment(ensemble, delta), windows * ensemble.n_paths()});
  }
  auto e = fit_dimension(std::move(samples));
  e.rejected_scales = std::move(rejected);
  return e;
}

IncrementScaleAccumulator::IncrementScaleAccumulator(const TimeGrid& grid,
                                                     std::span<const double> scales) {
  for (double delta : scales) {
    const auto m = scale_steps(grid, delta);
    if (!in_fit_range(grid, m)) {
      rejected_.push_back(delta);
      continue;
    }
    scales_.push_back({delta, m, (grid.n_steps() / m) * m, {}, {}, 0});
  }
  std::sort(scales_.begin(), scales_.end(),
            [](const Scale& a, const Scale& b) { return a.delta < b.delta; });
}

void IncrementScaleAccumulator::observe(const CrossSection& section) {
  const auto k = section.step;
  for (auto& s : scales_) {
    if (k % s.steps != 0 || k > s.last_end) continue;
    if (k > 0) {
      for (std::size_t i = 0; i < section.values.size(); ++i) {
        s.sum += std::abs(section.values[i] - s.anchor[i]);
      }
      s.count += section.values.size();
    }
    s.anchor.assign(section.values.begin(), section.values.end());
  }
}

std::vector<ScaleSample> IncrementScaleAccumulator::samples() const {
  std::vector<ScaleSample> out;
  for (const auto& s : scales_) {
    const double mean = s.count == 0 ? 0.0 : s.sum.value() / static_cast<double>(s.count);
    out.push_back({s.delta, s.steps, mean, s.count});
  }
  return out;
}

DimensionEstimate IncrementScaleAccumulator::estimate() const {
  auto e = fit_dimension(samples());
  e.rejected_scales = rejected_;
  return e;
}

}  // namespace zitterwalk
