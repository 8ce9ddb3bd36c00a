#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "zitterwalk/coefficients.hpp"
#include "zitterwalk/ensemble.hpp"
#include "zitterwalk/grid.hpp"

namespace zitterwalk::cli {

inline constexpr int kConfigSchemaVersion = 1;

enum class Scenario { free, ou_nelson, custom };
enum class Analysis { heisenberg, decompose, markov, equivalence, stability, fractal };
enum class EnsembleOutput { none, csv, binary };

[[nodiscard]] std::string_view to_string(Scenario s) noexcept;
[[nodiscard]] std::string_view to_string(Analysis a) noexcept;
[[nodiscard]] std::string_view to_string(EnsembleOutput o) noexcept;
[[nodiscard]] const std::vector<Analysis>& all_analyses();

struct InitialSpec {
  InitialCondition::Kind kind = InitialCondition::Kind::fixed;
  /// fixed: value; normal: mean, stddev; uniform: low, high.
  double a = 0.0;
  double b = 0.0;
};

struct RunConfig {
  Scenario scenario = Scenario::free;
  PhysicalScale scale;
  std::optional<double> omega;
  /// custom scenario: polynomial coefficients in x, lowest order first.
  std::vector<double> drift;
  std::vector<double> volatility;
  InitialSpec x0;

  std::uint64_t n_steps = 1'000'000;
  double horizon = 1.0;
  std::uint64_t n_paths = 10'000;
  std::uint64_t seed = 1;
  std::vector<Analysis> analyses = all_analyses();
  std::filesystem::path out_dir = "zitterwalk-out";

  double k_low = 0.1;
  double k_high = 10.0;

  std::uint32_t n_xbins = 20;
  std::uint64_t min_count = 1000;
  /// Number of evenly spaced steps fed to the decomposition and Markov estimators.
  std::uint64_t analysis_steps = 100;
  double volatility_tolerance = 0.02;
  double drift_slope_tolerance = 0.05;

  std::vector<double> comparison_times;
  std::optional<double> ks_threshold;
  std::optional<double> wasserstein_threshold;
  std::uint64_t reference_steps = 10'000;
  std::uint64_t calibration_pairs = 100;
  std::uint64_t calibration_steps = 64;
  double calibration_quantile = 0.99;

  double drift_offset = 1e-6;
  double volatility_offset = 1e-6;
  double initial_gap = 0.0;
  std::optional<double> lipschitz_bound;

  /// Fractal scales in multiples of dt.
  std::vector<std::uint64_t> fractal_scales{16, 64, 256, 1024, 4096};
  double fractal_tolerance = 0.05;

  EnsembleOutput ensemble_output = EnsembleOutput::none;
  std::uint64_t record_stride = 1000;

  bool convergence = false;

  [[nodiscard]] bool wants(Analysis a) const noexcept;
  [[nodiscard]] TimeGrid grid() const;
  [[nodiscard]] CoefficientField field() const;
  [[nodiscard]] InitialCondition initial_condition() const;
  /// Centre of the initial law, used as the start of the stability pair.
  [[nodiscard]] double initial_center() const noexcept;
  /// Slope of the drift in x when the drift is affine in x.
  [[nodiscard]] std::optional<double> affine_drift_slope() const;
  /// Declared Lipschitz constant, or the one implied by an affine scenario.
  [[nodiscard]] std::optional<double> effective_lipschitz() const;
  /// The effective configuration; the output directory is not part of it.
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Reads a JSON config; ConfigurationError with line and column for malformed input.
[[nodiscard]] nlohmann::json load_config_file(const std::filesystem::path& file);

/// Keys of `overrides` replace those of `base` (flags over file values).
[[nodiscard]] nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overrides);

/// Validates the document and applies defaults. Unknown keys, wrong types and invalid
/// values raise ConfigurationError naming the key.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& document);

}  // namespace zitterwalk::cli
