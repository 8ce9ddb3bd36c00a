#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace zitterwalk::cli {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitRuntime = 3 };

struct RunOptions {
  /// Worker threads for simulations; 0 means machine parallelism.
  unsigned threads = 0;
  /// Progress lines; null for silence.
  std::ostream* log = nullptr;
};

/// Simulate, run every configured analysis and write the reports plus summary.json.
[[nodiscard]] int run(const RunConfig& config, const RunOptions& options);

/// Simulate and write the ensemble file (binary unless csv is configured) with simulation.json.
[[nodiscard]] int simulate(const RunConfig& config, const RunOptions& options);

/// Run the configured analyses on a stored ZWLK ensemble.
[[nodiscard]] int analyze(const RunConfig& config, const std::filesystem::path& input,
                          const RunOptions& options);

/// run() at n_steps 1e4, 1e5 and 1e6 with convergence.json collecting the trends.
[[nodiscard]] int run_convergence(const RunConfig& config, const RunOptions& options);

/// Fairness diagnostics of one noise stream, written to stdout (and out_file if given).
[[nodiscard]] int noise_check(std::uint64_t seed, std::uint64_t path_id, std::size_t n,
                              const std::optional<std::filesystem::path>& out_file,
                              std::ostream& out);

/// Runs body and maps errors to exit codes: 2 for configuration and resolution errors,
/// 3 for numeric and other runtime errors. Diagnostics go to err; when out_dir is set
/// a summary.json recording the error is written there too.
[[nodiscard]] int guarded(const std::function<int()>& body, std::ostream& err,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
[[nodiscard]] std::string utc_timestamp();

}  // namespace zitterwalk::cli
