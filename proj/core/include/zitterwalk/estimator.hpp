#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zitterwalk/ensemble.hpp"

namespace zitterwalk {

// ---------------------------------------------------------------------------
// Heisenberg condition: (x(t+dt) - x(t))^2 / dt must stay inside [k_low, k_high].
// ---------------------------------------------------------------------------

struct RatioViolation {
  std::uint64_t step = 0;
  std::uint64_t path_id = 0;
  double ratio = 0.0;
};

/// Log2-binned histogram of ratios: bin j covers [2^(j + kMinExponent), 2^(j + kMinExponent + 1)).
/// Ratios below / above the covered range land in the first / last bin.
struct RatioHistogram {
  static constexpr int kMinExponent = -40;
  static constexpr int kBins = 80;
  std::array<std::uint64_t, kBins> counts{};

  void add(double ratio) noexcept;
  [[nodiscard]] static double lower_edge(int bin) noexcept;
};

struct HeisenbergReport {
  static constexpr std::size_t kMaxListedViolations = 100;

  double k_low = 0.0;
  double k_high = 0.0;
  std::uint64_t n_ratios = 0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::uint64_t violation_count = 0;
  /// First kMaxListedViolations violations in (step, path) order.
  std::vector<RatioViolation> violations;
  /// Per-step ratio series; filled by heisenberg_check on a single path only.
  std::vector<double> ratios;
  /// Quantiles at levels {0, 0.01, 0.25, 0.5, 0.75, 0.99, 1}; single-path reports only.
  std::vector<double> quantiles;
  RatioHistogram histogram;
  bool pass = false;
};

/// r_k = (dx_k)^2 / dt for every step of a dense path; pass iff all r_k lie in [k_low, k_high].
/// Throws ResolutionError for thinned paths, ConfigurationError unless 0 < k_low < k_high.
[[nodiscard]] HeisenbergReport heisenberg_check(const Path& path, double k_low, double k_high);

/// Streaming form over every path and step of an ensemble simulation.
class HeisenbergMonitor final : public StepObserver {
 public:
  HeisenbergMonitor(double k_low, double k_high);
  void observe(const CrossSection& section) override;
  [[nodiscard]] HeisenbergReport report() const;

 private:
  HeisenbergReport report_;
};

// ---------------------------------------------------------------------------
// Drift / volatility decomposition, dx = b dt + s eta sqrt(dt), estimated by
// binning each cross-section on x.
// ---------------------------------------------------------------------------

struct DecompositionCell {
  std::uint64_t step = 0;
  double time = 0.0;
  std::uint32_t bin = 0;
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  std::uint64_t count = 0;
  double mean_x = 0.0;
  /// Estimated conditional drift, (mean dx) / dt. NaN when undetermined.
  double drift = 0.0;
  /// Estimated volatility, sqrt(mean (dx - drift dt)^2 / dt) with 1/n normalisation.
  double volatility = 0.0;
  double eta_mean = 0.0;
  double eta_square_mean = 0.0;
  /// count >= min_count.
  bool determined = false;
  /// Determined, but the residual spread is at rounding level (volatility ~ 0).
  bool degenerate = false;
};

/// Standardised residuals of one analysed step (per path, in path order).
struct ResidualSeries {
  std::uint64_t step = 0;
  std::vector<std::uint32_t> bins;
  /// NaN where the path's bin is undetermined or degenerate.
  std::vector<double> eta;
  std::vector<double> increments;
};

struct DecompositionEstimate {
  std::uint32_t n_xbins = 0;
  std::uint64_t min_count = 0;
  double dt = 0.0;
  std::uint64_t n_paths = 0;
  std::vector<DecompositionCell> cells;
  std::vector<ResidualSeries> residuals;

  [[nodiscard]] std::uint64_t determined_cells() const noexcept;
  [[nodiscard]] std::uint64_t degenerate_cells() const noexcept;
};

struct DecompositionOptions {
  /// Analyse steps k with k % step_stride == 0.
  std::uint64_t step_stride = 1;
  bool keep_residuals = false;
};

/// Streaming estimator; feed it cross-sections from a simulation or a replay.
class DecompositionAccumulator final : public StepObserver {
 public:
  DecompositionAccumulator(std::uint32_t n_xbins, std::uint64_t min_count,
                           DecompositionOptions options = {});
  void observe(const CrossSection& section) override;
  [[nodiscard]] const DecompositionEstimate& estimate() const noexcept { return estimate_; }
  [[nodiscard]] DecompositionEstimate take() noexcept { return std::move(estimate_); }

 private:
  std::uint32_t n_xbins_;
  std::uint64_t min_count_;
  DecompositionOptions options_;
  DecompositionEstimate estimate_;
  std::vector<std::uint32_t> bin_of_;
};

/// Requires a dense ensemble with at least two paths, n_xbins >= 1 and min_count >= 30.
[[nodiscard]] DecompositionEstimate estimate_decomposition(const Ensemble& ensemble,
                                                           std::uint32_t n_xbins,
                                                           std::uint64_t min_count,
                                                           DecompositionOptions options = {
                                                               1, true});

struct ResidualMoment {
  std::uint64_t step = 0;
  double time = 0.0;
  std::uint32_t bin = 0;
  std::uint64_t count = 0;
  double mean = 0.0;
  double square_mean = 0.0;
  /// |mean| <= 4/sqrt(count) and |square_mean - 1| <= 8/sqrt(count).
  bool within_tolerance = false;
};

/// Moments of eta per determined, non-degenerate bin.
/// Throws InsufficientDataError when there is none.
[[nodiscard]] std::vector<ResidualMoment> residual_moments(const DecompositionEstimate& estimate);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_standard_error = 0.0;
  std::uint64_t points = 0;
  double total_weight = 0.0;
};

/// Count-weighted least squares of the estimated drift on the bin centre, pooled over
/// every determined, non-degenerate cell.
[[nodiscard]] LinearFit drift_regression(const DecompositionEstimate& estimate);

/// eta_k = (dx_k - b(t_k, x_k) dt) / (sigma(t_k, x_k) sqrt(dt)) using the true coefficients.
/// For a walk driven by +/-1 noise this reproduces eps_k.
[[nodiscard]] std::vector<double> standardized_noise(const Path& path,
                                                     const CoefficientField& field);

// ---------------------------------------------------------------------------
// Markov diagnostic: does the increment law in a (t, x) cell depend on the sign of
// the previous increment?
// ---------------------------------------------------------------------------

enum class MarkovVerdict { consistent, violated, undetermined };

[[nodiscard]] const char* to_string(MarkovVerdict verdict) noexcept;

struct MarkovCellTest {
  std::uint64_t step = 0;
  double time = 0.0;
  std::uint32_t bin = 0;
  std::uint64_t n_up = 0;
  std::uint64_t n_down = 0;
  /// Two-sample z statistic on the mean increment.
  double z_mean = 0.0;
  /// Two-sample z statistic on the mean squared increment.
  double z_second_moment = 0.0;

  [[nodiscard]] double worst() const noexcept;
};

struct MarkovReport {
  static constexpr std::size_t kMaxListedCells = 100;

  MarkovVerdict verdict = MarkovVerdict::undetermined;
  std::uint64_t n_paths = 0;
  std::uint64_t steps_analysed = 0;
  std::uint64_t cells_tested = 0;
  std::uint64_t cells_skipped = 0;
  std::uint64_t n_tests = 0;
  /// Family-wise level of a two-sided 4 sigma test, Bonferroni-split over n_tests.
  double z_threshold = 0.0;
  std::optional<MarkovCellTest> worst_cell;
  std::uint64_t flagged_cells = 0;
  std::vector<MarkovCellTest> flagged;
  std::string reason;
};

struct MarkovOptions {
  std::uint64_t step_stride = 1;
  /// Minimum occupancy of each previous-sign group in a cell.
  std::uint64_t min_group_count = 30;
  /// Below this many paths the verdict is undetermined.
  std::uint64_t min_paths = 10000;
  double sigmas = 4.0;
};

class MarkovAccumulator final : public StepObserver {
 public:
  MarkovAccumulator(std::uint32_t n_xbins, MarkovOptions options = {});
  void observe(const CrossSection& section) override;
  [[nodiscard]] MarkovReport report() const;

 private:
  std::uint32_t n_xbins_;
  MarkovOptions options_;
  std::uint64_t n_paths_ = 0;
  std::uint64_t steps_ = 0;
  std::uint64_t skipped_ = 0;
  std::vector<MarkovCellTest> tests_;
  std::vector<std::uint32_t> bin_of_;
};

/// Requires a dense ensemble; fewer than options.min_paths paths gives an undetermined verdict.
[[nodiscard]] MarkovReport markov_diagnostic(const Ensemble& ensemble, std::uint32_t n_xbins,
                                             MarkovOptions options = {});

/// z such that a two-sided normal tail at z has probability tail_probability.
[[nodiscard]] double two_sided_normal_quantile(double tail_probability);

}  // namespace zitterwalk
