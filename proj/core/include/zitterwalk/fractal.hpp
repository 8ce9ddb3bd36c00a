#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zitterwalk/ensemble.hpp"
#include "zitterwalk/summation.hpp"

namespace zitterwalk {

/// Scale limits for the dimension fit, in multiples of dt and fractions of the horizon.
inline constexpr std::uint64_t kMinScaleSteps = 16;
inline constexpr double kMaxScaleFraction = 0.25;
inline constexpr std::size_t kMinScales = 4;
inline constexpr double kMinScaleDecades = 1.5;
inline constexpr double kMinRSquared = 0.99;

/// delta / dt as an integer; ResolutionError when delta is not a multiple of dt,
/// ConfigurationError when delta is not in (0, horizon].
[[nodiscard]] std::uint64_t scale_steps(const TimeGrid& grid, double delta);

/// Mean of |x(t + delta) - x(t)| over all paths and the non-overlapping aligned
/// windows t = 0, delta, 2 delta, ...
/// Needs delta <= horizon / 4 and every window end point recorded.
[[nodiscard]] double mean_increment(const Ensemble& ensemble, double delta);

struct ScaleSample {
  double scale = 0.0;
  std::uint64_t steps = 0;
  double mean_increment = 0.0;
  std::uint64_t count = 0;
};

struct DimensionEstimate {
  /// Strictly increasing.
  std::vector<ScaleSample> samples;
  /// Requested scales that fell outside [16 dt, horizon / 4].
  std::vector<double> rejected_scales;
  double hurst = 0.0;
  double intercept = 0.0;
  /// 1 / hurst. Meaningful only when reliable.
  double dimension = 0.0;
  double r_squared = 0.0;
  double scale_min = 0.0;
  double scale_max = 0.0;
  /// R^2 >= 0.99 over at least 4 scales.
  bool reliable = false;
  std::string reason;
};

/// Least-squares fit of log mean|dx| = H log(delta) + c.
/// InsufficientDataError with fewer than 4 valid scales or less than 1.5 decades of range;
/// ConfigurationError for repeated scales; NumericDomainError when a mean increment is 0.
[[nodiscard]] DimensionEstimate estimate_dimension(const Ensemble& ensemble,
                                                   std::span<const double> scales);

/// Fit on precomputed (scale, mean increment) samples; same validation as estimate_dimension
/// except the scale range, which the caller has already applied.
[[nodiscard]] DimensionEstimate fit_dimension(std::vector<ScaleSample> samples);

/// Streams the aligned window increments of every scale during a simulation.
class IncrementScaleAccumulator final : public StepObserver {
 public:
  /// Scales outside [16 dt, horizon / 4] are kept out of the fit and reported as rejected.
  IncrementScaleAccumulator(const TimeGrid& grid, std::span<const double> scales);
  void observe(const CrossSection& section) override;
  [[nodiscard]] std::vector<ScaleSample> samples() const;
  [[nodiscard]] DimensionEstimate estimate() const;

 private:
  struct Scale {
    double delta;
    std::uint64_t steps;
    std::uint64_t last_end;
    std::vector<double> anchor;
    NeumaierSum sum;
    std::uint64_t count = 0;
  };
  std::vector<Scale> scales_;
  std::vector<double> rejected_;
};

}  // namespace zitterwalk
