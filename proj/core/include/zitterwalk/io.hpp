#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "zitterwalk/equivalence.hpp"
#include "zitterwalk/estimator.hpp"
#include "zitterwalk/fractal.hpp"
#include "zitterwalk/noise.hpp"

namespace zitterwalk {

/// Version stamped into every JSON document this library emits.
inline constexpr int kSchemaVersion = 1;

// JSON views of the analysis results. Non-finite numbers serialise as null.
void to_json(nlohmann::json& j, const TimeGrid& grid);
void to_json(nlohmann::json& j, const NoiseBiasReport& r);
void to_json(nlohmann::json& j, const HeisenbergReport& r);
void to_json(nlohmann::json& j, const LinearFit& fit);
void to_json(nlohmann::json& j, const MarkovCellTest& c);
void to_json(nlohmann::json& j, const MarkovReport& r);
void to_json(nlohmann::json& j, const ComparisonPoint& p);
void to_json(nlohmann::json& j, const ComparisonReport& r);
void to_json(nlohmann::json& j, const StabilityReport& r);
void to_json(nlohmann::json& j, const ScaleSample& s);
void to_json(nlohmann::json& j, const DimensionEstimate& e);

/// Summary of a decomposition: cell counts, the drift regression and the residual
/// moment check. Per-cell rows go to CSV.
[[nodiscard]] nlohmann::json decomposition_summary(const DecompositionEstimate& estimate);

// CSV series. Every writer emits a header row; numbers use round-trip precision.

/// path_id,t,x for every recorded step of every path.
void write_ensemble_csv(std::ostream& out, const Ensemble& ensemble);
/// One row per (step, bin) cell.
void write_decomposition_csv(std::ostream& out, const DecompositionEstimate& estimate);
/// One row per comparison time.
void write_comparison_csv(std::ostream& out, const ComparisonReport& report);
/// scale,steps,mean_increment,count
void write_scales_csv(std::ostream& out, const DimensionEstimate& estimate);
/// step,t,gap,bound for every stride-th step and always the last one.
void write_stability_csv(std::ostream& out, const StabilityReport& report, const TimeGrid& grid,
                         std::uint64_t stride = 1);

// Little-endian columnar ensemble file:
//   "ZWLK" u32 version, u64 n_paths, u64 n_steps, f64 horizon, u64 seed, u64 n_recorded,
//   u32 flags (bit 0: increments present, bit 1: gaussian noise), u32 reserved,
//   u64 step[n_recorded], u64 path_id[n_paths], f64 time[n_recorded],
//   f64 value[n_paths][n_recorded], then f64 increment[n_paths][n_recorded] if bit 0 is set
//   (NaN where an increment was not recorded).

inline constexpr std::uint32_t kBinaryVersion = 1;

void write_ensemble_binary(const std::filesystem::path& file, const Ensemble& ensemble);

/// Rebuilds the stored cross-sections on the file's grid; the coefficient field is not
/// part of the file and must be supplied. ConfigurationError for malformed files.
[[nodiscard]] Ensemble read_ensemble_binary(const std::filesystem::path& file,
                                            const CoefficientField& field);

}  // namespace zitterwalk
