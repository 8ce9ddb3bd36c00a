#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "pipeline.hpp"
#include "zitterwalk/error.hpp"

namespace {

using nlohmann::json;
using namespace zitterwalk::cli;

enum class FlagKind { scalar, text, list, text_list, boolean };

struct FlagSpec {
  const char* key;
  FlagKind kind;
  const char* help;
};

// Every RunConfig key except drift/volatility polynomials, which only a file can carry.
const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs{
      {"scenario", FlagKind::text, "free, ou_nelson or custom"},
      {"hbar", FlagKind::scalar, "reduced Planck constant"},
      {"mass", FlagKind::scalar, "particle mass"},
      {"omega", FlagKind::scalar, "OU frequency (ou_nelson)"},
      {"x0", FlagKind::scalar, "fixed initial value"},
      {"n_steps", FlagKind::scalar, "grid steps"},
      {"horizon", FlagKind::scalar, "time horizon"},
      {"n_paths", FlagKind::scalar, "number of paths"},
      {"seed", FlagKind::scalar, "master seed"},
      {"analyses", FlagKind::text_list, "comma list of analyses"},
      {"k_low", FlagKind::scalar, "lower Heisenberg bound"},
      {"k_high", FlagKind::scalar, "upper Heisenberg bound"},
      {"n_xbins", FlagKind::scalar, "x bins per step"},
      {"min_count", FlagKind::scalar, "minimum bin occupancy"},
      {"analysis_steps", FlagKind::scalar, "steps fed to decomposition and Markov estimators"},
      {"volatility_tolerance", FlagKind::scalar, "relative volatility tolerance"},
      {"drift_slope_tolerance", FlagKind::scalar, "drift slope tolerance"},
      {"comparison_times", FlagKind::list, "comma list of comparison times"},
      {"ks_threshold", FlagKind::scalar, "fixed KS threshold (skips calibration)"},
      {"wasserstein_threshold", FlagKind::scalar, "W1 threshold"},
      {"reference_steps", FlagKind::scalar, "grid steps of the Gaussian reference"},
      {"calibration_pairs", FlagKind::scalar, "seed pairs for KS calibration"},
      {"calibration_steps", FlagKind::scalar, "grid steps for KS calibration"},
      {"calibration_quantile", FlagKind::scalar, "KS calibration quantile"},
      {"drift_offset", FlagKind::scalar, "stability drift offset"},
      {"volatility_offset", FlagKind::scalar, "stability volatility offset"},
      {"initial_gap", FlagKind::scalar, "stability initial gap"},
      {"lipschitz_bound", FlagKind::scalar, "declared Lipschitz constant"},
      {"fractal_scales", FlagKind::list, "comma list of scales in steps"},
      {"fractal_tolerance", FlagKind::scalar, "tolerance on the dimension"},
      {"ensemble_output", FlagKind::text, "none, csv or binary"},
      {"record_stride", FlagKind::scalar, "stored step stride for ensemble output"},
  };
  return specs;
}

std::string kebab(std::string key) {
  for (auto& ch : key) {
    if (ch == '_') ch = '-';
  }
  return key;
}

json parse_scalar(const std::string& text, const std::string& flag) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded() || !v.is_number()) {
    throw zitterwalk::ConfigurationError("flag --" + flag + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text) {
    if (ch == ',') {
      out.push_back(item);
      item.clear();
    } else if (ch != ' ') {
      item += ch;
    }
  }
  out.push_back(item);
  return out;
}

struct ConfigFlags {
  std::string config_file;
  std::string out_dir;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--out-dir", out_dir, "output directory");
    for (const auto& spec : flag_specs()) {
      app.add_option("--" + kebab(spec.key), values[spec.key], spec.help);
    }
  }

  [[nodiscard]] json overrides(const CLI::App& app) const {
    json o = json::object();
    for (const auto& spec : flag_specs()) {
      const std::string flag = kebab(spec.key);
      if (app.count("--" + flag) == 0) continue;
      const std::string& text = values.at(spec.key);
      switch (spec.kind) {
        case FlagKind::scalar: o[spec.key] = parse_scalar(text, flag); break;
        case FlagKind::text: o[spec.key] = text; break;
        case FlagKind::list: {
          json a = json::array();
          for (const auto& item : split(text)) a.push_back(parse_scalar(item, flag));
          o[spec.key] = a;
          break;
        }
        case FlagKind::text_list: o[spec.key] = split(text); break;
        case FlagKind::boolean: o[spec.key] = text == "true" || text == "1"; break;
      }
    }
    if (app.count("--out-dir") > 0) o["out_dir"] = out_dir;
    return o;
  }

  [[nodiscard]] RunConfig resolve(const CLI::App& app) const {
    json base = json::object();
    if (!config_file.empty()) base = load_config_file(config_file);
    return parse_config(merge_config(std::move(base), overrides(app)));
  }
};

std::optional<unsigned> threads_from_environment() {
  const char* raw = std::getenv("ZITTERWALK_THREADS");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) {
    throw zitterwalk::ConfigurationError(std::string("ZITTERWALK_THREADS must be a positive integer, got '") +
                                         raw + "'");
  }
  return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zitterwalk: simulation and verification of infinitesimal random walks"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress output");

  auto* run_cmd = app.add_subcommand("run", "simulate and run the configured analyses");
  ConfigFlags run_flags;
  run_flags.attach(*run_cmd);
  bool convergence = false;
  run_cmd->add_flag("--convergence", convergence, "repeat at n_steps 1e4, 1e5, 1e6 and report trends");

  auto* sim_cmd = app.add_subcommand("simulate", "simulate and store the ensemble");
  ConfigFlags sim_flags;
  sim_flags.attach(*sim_cmd);

  auto* analyze_cmd = app.add_subcommand("analyze", "run analyses on a stored ensemble");
  ConfigFlags analyze_flags;
  analyze_flags.attach(*analyze_cmd);
  std::string input;
  analyze_cmd->add_option("--input", input, "ZWLK ensemble file")->required();

  auto* noise_cmd = app.add_subcommand("noise-check", "fairness and independence of one noise stream");
  std::uint64_t noise_seed = 1;
  std::uint64_t noise_path = 0;
  std::size_t noise_n = 1'000'000;
  std::string noise_out;
  noise_cmd->add_option("--seed", noise_seed, "master seed");
  noise_cmd->add_option("--path-id", noise_path, "path id");
  noise_cmd->add_option("--n", noise_n, "number of draws");
  noise_cmd->add_option("--out", noise_out, "also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  RunOptions options;
  if (!quiet) options.log = &std::cerr;

  if (noise_cmd->parsed()) {
    return guarded(
        [&] {
          if (noise_n < 100) throw zitterwalk::ConfigurationError("--n: needs at least 100 draws");
          return noise_check(noise_seed, noise_path, noise_n,
                             noise_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(noise_out),
                             std::cout);
        },
        std::cerr);
  }

  RunConfig config;
  const auto& flags = run_cmd->parsed() ? run_flags : sim_cmd->parsed() ? sim_flags : analyze_flags;
  const CLI::App& sub = run_cmd->parsed() ? *run_cmd : sim_cmd->parsed() ? *sim_cmd : *analyze_cmd;
  int code = guarded(
      [&] {
        config = flags.resolve(sub);
        if (const auto t = threads_from_environment()) options.threads = *t;
        if (convergence) config.convergence = true;
        return kExitPass;
      },
      std::cerr);
  if (code != kExitPass) return code;

  return guarded(
      [&] {
        if (run_cmd->parsed()) return config.convergence ? run_convergence(config, options) : run(config, options);
        if (sim_cmd->parsed()) return simulate(config, options);
        return analyze(config, input, options);
      },
      std::cerr, config.out_dir);
}
