#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "zitterwalk/error.hpp"

namespace zitterwalk::cli {

using nlohmann::json;

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::free: return "free";
    case Scenario::ou_nelson: return "ou_nelson";
    case Scenario::custom: return "custom";
  }
  return "free";
}

std::string_view to_string(Analysis a) noexcept {
  switch (a) {
    case Analysis::heisenberg: return "heisenberg";
    case Analysis::decompose: return "decompose";
    case Analysis::markov: return "markov";
    case Analysis::equivalence: return "equivalence";
    case Analysis::stability: return "stability";
    case Analysis::fractal: return "fractal";
  }
  return "heisenberg";
}

std::string_view to_string(EnsembleOutput o) noexcept {
  switch (o) {
    case EnsembleOutput::none: return "none";
    case EnsembleOutput::csv: return "csv";
    case EnsembleOutput::binary: return "binary";
  }
  return "none";
}

const std::vector<Analysis>& all_analyses() {
  static const std::vector<Analysis> all{Analysis::heisenberg, Analysis::decompose,
                                         Analysis::markov,     Analysis::equivalence,
                                         Analysis::stability,  Analysis::fractal};
  return all;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "schema_version",     "scenario",          "hbar",
      "mass",               "omega",             "drift",
      "volatility",         "x0",                "n_steps",
      "horizon",            "n_paths",           "seed",
      "analyses",           "out_dir",           "k_low",
      "k_high",             "n_xbins",           "min_count",
      "analysis_steps",     "volatility_tolerance", "drift_slope_tolerance",
      "comparison_times",   "ks_threshold",      "wasserstein_threshold",
      "reference_steps",    "calibration_pairs", "calibration_steps",
      "calibration_quantile", "drift_offset",    "volatility_offset",
      "initial_gap",        "lipschitz_bound",   "fractal_scales",
      "fractal_tolerance",  "ensemble_output",   "record_stride",
      "convergence"};
  return keys;
}

[[noreturn]] void fail(std::string_view key, std::string_view message) {
  throw ConfigurationError("config key '" + std::string(key) + "': " + std::string(message));
}

double as_real(const json& v, std::string_view key) {
  if (!v.is_number()) fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

std::uint64_t as_count(const json& v, std::string_view key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) fail(key, "must be >= 0");
    return static_cast<std::uint64_t>(i);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d < 0x1.0p64 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
    fail(key, "expected a non-negative integer");
  }
  fail(key, "expected a non-negative integer");
}

std::string as_string(const json& v, std::string_view key) {
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_reals(const json& v, std::string_view key) {
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, key));
  return out;
}

double positive(double v, std::string_view key) {
  if (!(v > 0.0)) fail(key, "must be > 0");
  return v;
}

std::uint64_t at_least(std::uint64_t v, std::uint64_t lo, std::string_view key) {
  if (v < lo) fail(key, "must be >= " + std::to_string(lo));
  return v;
}

InitialSpec parse_x0(const json& v) {
  InitialSpec spec;
  if (v.is_number()) {
    spec.a = as_real(v, "x0");
    return spec;
  }
  if (!v.is_object()) fail("x0", "expected a number or an object with a 'distribution'");
  if (!v.contains("distribution")) fail("x0.distribution", "missing");
  const std::string kind = as_string(v["distribution"], "x0.distribution");
  std::vector<std::string> fields;
  if (kind == "fixed") {
    spec.kind = InitialCondition::Kind::fixed;
    fields = {"value"};
  } else if (kind == "normal") {
    spec.kind = InitialCondition::Kind::normal;
    fields = {"mean", "stddev"};
  } else if (kind == "uniform") {
    spec.kind = InitialCondition::Kind::uniform;
    fields = {"low", "high"};
  } else {
    fail("x0.distribution", "expected fixed, normal or uniform, got '" + kind + "'");
  }
  for (const auto& [k, _] : v.items()) {
    if (k != "distribution" && std::find(fields.begin(), fields.end(), k) == fields.end()) {
      fail("x0." + k, "unknown key for distribution '" + kind + "'");
    }
  }
  double values[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string name = "x0." + fields[i];
    if (!v.contains(fields[i])) fail(name, "missing");
    values[i] = as_real(v[fields[i]], name);
  }
  spec.a = values[0];
  spec.b = values[1];
  if (spec.kind == InitialCondition::Kind::normal && !(spec.b >= 0.0)) fail("x0.stddev", "must be >= 0");
  if (spec.kind == InitialCondition::Kind::uniform && !(spec.b > spec.a)) fail("x0.high", "must exceed low");
  return spec;
}

double polynomial(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

}  // namespace

bool RunConfig::wants(Analysis a) const noexcept {
  return std::find(analyses.begin(), analyses.end(), a) != analyses.end();
}

TimeGrid RunConfig::grid() const { return make_grid(n_steps, horizon); }

CoefficientField RunConfig::field() const {
  const double sigma = std::sqrt(scale.diffusion());
  switch (scenario) {
    case Scenario::free: return CoefficientField::constant(0.0, sigma);
    case Scenario::ou_nelson: return CoefficientField::ou_nelson(*omega, sigma);
    case Scenario::custom: break;
  }
  if (drift.size() <= 1 && volatility.size() <= 1) {
    return CoefficientField::constant(drift.empty() ? 0.0 : drift[0], volatility[0]);
  }
  return CoefficientField::user([c = drift](double, double x) { return polynomial(c, x); },
                                [c = volatility](double, double x) { return polynomial(c, x); },
                                "custom");
}

InitialCondition RunConfig::initial_condition() const {
  switch (x0.kind) {
    case InitialCondition::Kind::fixed: return InitialCondition::fixed(x0.a);
    case InitialCondition::Kind::normal: return InitialCondition::normal(x0.a, x0.b);
    case InitialCondition::Kind::uniform: return InitialCondition::uniform(x0.a, x0.b);
  }
  return InitialCondition::fixed(x0.a);
}

double RunConfig::initial_center() const noexcept {
  return x0.kind == InitialCondition::Kind::uniform ? 0.5 * (x0.a + x0.b) : x0.a;
}

std::optional<double> RunConfig::affine_drift_slope() const {
  switch (scenario) {
    case Scenario::free: return 0.0;
    case Scenario::ou_nelson: return -*omega;
    case Scenario::custom: break;
  }
  if (drift.size() <= 2) return drift.size() == 2 ? drift[1] : 0.0;
  return std::nullopt;
}

std::optional<double> RunConfig::effective_lipschitz() const {
  if (lipschitz_bound) return lipschitz_bound;
  switch (scenario) {
    case Scenario::free: return 0.0;
    case Scenario::ou_nelson: return *omega;
    case Scenario::custom: break;
  }
  if (drift.size() <= 2 && volatility.size() <= 2) {
    const double db = drift.size() == 2 ? std::abs(drift[1]) : 0.0;
    const double ds = volatility.size() == 2 ? std::abs(volatility[1]) : 0.0;
    return std::max(db, ds);
  }
  return std::nullopt;
}

json RunConfig::to_json() const {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["scenario"] = to_string(scenario);
  j["hbar"] = scale.hbar;
  j["mass"] = scale.mass;
  if (omega) j["omega"] = *omega;
  if (scenario == Scenario::custom) {
    j["drift"] = drift;
    j["volatility"] = volatility;
  }
  switch (x0.kind) {
    case InitialCondition::Kind::fixed: j["x0"] = x0.a; break;
    case InitialCondition::Kind::normal:
      j["x0"] = {{"distribution", "normal"}, {"mean", x0.a}, {"stddev", x0.b}};
      break;
    case InitialCondition::Kind::uniform:
      j["x0"] = {{"distribution", "uniform"}, {"low", x0.a}, {"high", x0.b}};
      break;
  }
  j["n_steps"] = n_steps;
  j["horizon"] = horizon;
  j["n_paths"] = n_paths;
  j["seed"] = seed;
  json names = json::array();
  for (auto a : analyses) names.push_back(to_string(a));
  j["analyses"] = names;
  j["k_low"] = k_low;
  j["k_high"] = k_high;
  j["n_xbins"] = n_xbins;
  j["min_count"] = min_count;
  j["analysis_steps"] = analysis_steps;
  j["volatility_tolerance"] = volatility_tolerance;
  j["drift_slope_tolerance"] = drift_slope_tolerance;
  j["comparison_times"] = comparison_times;
  j["ks_threshold"] = ks_threshold ? json(*ks_threshold) : json(nullptr);
  j["wasserstein_threshold"] = wasserstein_threshold ? json(*wasserstein_threshold) : json(nullptr);
  j["reference_steps"] = reference_steps;
  j["calibration_pairs"] = calibration_pairs;
  j["calibration_steps"] = calibration_steps;
  j["calibration_quantile"] = calibration_quantile;
  j["drift_offset"] = drift_offset;
  j["volatility_offset"] = volatility_offset;
  j["initial_gap"] = initial_gap;
  j["lipschitz_bound"] = lipschitz_bound ? json(*lipschitz_bound) : json(nullptr);
  j["fractal_scales"] = fractal_scales;
  j["fractal_tolerance"] = fractal_tolerance;
  j["ensemble_output"] = to_string(ensemble_output);
  j["record_stride"] = record_stride;
  j["convergence"] = convergence;
  return j;
}

json load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigurationError("cannot read config file " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" in the message
    throw ConfigurationError(file.string() + ": " + e.what());
  }
}

json merge_config(json base, const json& overrides) {
  if (base.is_null()) base = json::object();
  if (!base.is_object()) throw ConfigurationError("config document must be a JSON object");
  for (const auto& [k, v] : overrides.items()) base[k] = v;
  return base;
}

RunConfig parse_config(const json& document) {
  if (!document.is_object()) throw ConfigurationError("config document must be a JSON object");
  for (const auto& [k, _] : document.items()) {
    if (!known_keys().contains(k)) fail(k, "unknown key");
  }
  const auto has = [&](const char* key) { return document.contains(key) && !document[key].is_null(); };
  const auto& d = document;

  RunConfig c;
  if (has("schema_version")) {
    const auto v = as_count(d["schema_version"], "schema_version");
    if (v != kConfigSchemaVersion) {
      fail("schema_version", "unsupported version " + std::to_string(v) + " (expected " +
                                 std::to_string(kConfigSchemaVersion) + ")");
    }
  }

  if (has("scenario")) {
    const auto s = as_string(d["scenario"], "scenario");
    if (s == "free") c.scenario = Scenario::free;
    else if (s == "ou_nelson") c.scenario = Scenario::ou_nelson;
    else if (s == "custom") c.scenario = Scenario::custom;
    else fail("scenario", "expected free, ou_nelson or custom, got '" + s + "'");
  }
  if (has("hbar")) c.scale.hbar = as_real(d["hbar"], "hbar");
  if (has("mass")) c.scale.mass = as_real(d["mass"], "mass");
  try {
    c.scale.validate();
  } catch (const ConfigurationError& e) {
    fail("hbar/mass", e.what());
  }

  if (c.scenario == Scenario::ou_nelson) {
    if (!has("omega")) fail("omega", "required for scenario ou_nelson");
    c.omega = positive(as_real(d["omega"], "omega"), "omega");
  } else if (has("omega")) {
    fail("omega", "only valid for scenario ou_nelson");
  }
  if (c.scenario == Scenario::custom) {
    if (!has("volatility")) fail("volatility", "required for scenario custom");
    c.volatility = as_reals(d["volatility"], "volatility");
    if (c.volatility.empty()) fail("volatility", "needs at least one coefficient");
    if (has("drift")) c.drift = as_reals(d["drift"], "drift");
  } else {
    for (const char* key : {"drift", "volatility"}) {
      if (has(key)) fail(key, "only valid for scenario custom");
    }
  }
  if (has("x0")) c.x0 = parse_x0(d["x0"]);

  if (has("n_steps")) c.n_steps = at_least(as_count(d["n_steps"], "n_steps"), 1, "n_steps");
  if (has("horizon")) c.horizon = positive(as_real(d["horizon"], "horizon"), "horizon");
  if (has("n_paths")) c.n_paths = at_least(as_count(d["n_paths"], "n_paths"), 1, "n_paths");
  if (has("seed")) c.seed = as_count(d["seed"], "seed");
  try {
    (void)c.grid();
  } catch (const ConfigurationError& e) {
    fail("n_steps/horizon", e.what());
  }

  if (has("analyses")) {
    const auto& a = d["analyses"];
    if (!a.is_array()) fail("analyses", "expected an array of analysis names");
    c.analyses.clear();
    for (const auto& name : a) {
      const auto s = as_string(name, "analyses");
      const auto& all = all_analyses();
      const auto it = std::find_if(all.begin(), all.end(),
                                   [&](Analysis x) { return to_string(x) == s; });
      if (it == all.end()) fail("analyses", "unknown analysis '" + s + "'");
      if (!c.wants(*it)) c.analyses.push_back(*it);
    }
  }
  if (has("out_dir")) c.out_dir = as_string(d["out_dir"], "out_dir");

  c.k_low = 0.1 * c.scale.diffusion();
  c.k_high = 10.0 * c.scale.diffusion();
  if (has("k_low")) c.k_low = positive(as_real(d["k_low"], "k_low"), "k_low");
  if (has("k_high")) c.k_high = positive(as_real(d["k_high"], "k_high"), "k_high");
  if (!(c.k_low < c.k_high)) fail("k_high", "must exceed k_low");

  if (has("n_xbins")) {
    const auto v = at_least(as_count(d["n_xbins"], "n_xbins"), 1, "n_xbins");
    if (v > 1'000'000) fail("n_xbins", "must be <= 1000000");
    c.n_xbins = static_cast<std::uint32_t>(v);
  }
  if (has("min_count")) c.min_count = at_least(as_count(d["min_count"], "min_count"), 30, "min_count");
  if (has("analysis_steps")) {
    c.analysis_steps = at_least(as_count(d["analysis_steps"], "analysis_steps"), 1, "analysis_steps");
  }
  if (has("volatility_tolerance")) {
    c.volatility_tolerance = positive(as_real(d["volatility_tolerance"], "volatility_tolerance"),
                                      "volatility_tolerance");
  }
  if (has("drift_slope_tolerance")) {
    c.drift_slope_tolerance = positive(as_real(d["drift_slope_tolerance"], "drift_slope_tolerance"),
                                       "drift_slope_tolerance");
  }

  if (has("comparison_times")) {
    c.comparison_times = as_reals(d["comparison_times"], "comparison_times");
    if (c.comparison_times.empty()) fail("comparison_times", "needs at least one time");
    for (double t : c.comparison_times) {
      if (!(t > 0.0 && t <= c.horizon)) fail("comparison_times", "times must lie in (0, horizon]");
    }
  } else {
    c.comparison_times = {0.25 * c.horizon, 0.5 * c.horizon, c.horizon};
  }
  if (has("ks_threshold")) {
    const double v = as_real(d["ks_threshold"], "ks_threshold");
    if (!(v > 0.0 && v <= 1.0)) fail("ks_threshold", "must lie in (0, 1]");
    c.ks_threshold = v;
  }
  if (has("wasserstein_threshold")) {
    c.wasserstein_threshold =
        positive(as_real(d["wasserstein_threshold"], "wasserstein_threshold"), "wasserstein_threshold");
  }
  c.reference_steps = std::min<std::uint64_t>(c.n_steps, 10'000);
  if (has("reference_steps")) {
    c.reference_steps = at_least(as_count(d["reference_steps"], "reference_steps"), 1, "reference_steps");
  }
  if (has("calibration_pairs")) {
    c.calibration_pairs =
        at_least(as_count(d["calibration_pairs"], "calibration_pairs"), 1, "calibration_pairs");
  }
  if (has("calibration_steps")) {
    c.calibration_steps =
        at_least(as_count(d["calibration_steps"], "calibration_steps"), 1, "calibration_steps");
  }
  if (has("calibration_quantile")) {
    const double q = as_real(d["calibration_quantile"], "calibration_quantile");
    if (!(q > 0.0 && q < 1.0)) fail("calibration_quantile", "must lie in (0, 1)");
    c.calibration_quantile = q;
  }

  if (has("drift_offset")) c.drift_offset = as_real(d["drift_offset"], "drift_offset");
  if (has("volatility_offset")) c.volatility_offset = as_real(d["volatility_offset"], "volatility_offset");
  if (has("initial_gap")) c.initial_gap = as_real(d["initial_gap"], "initial_gap");
  if (has("lipschitz_bound")) {
    const double v = as_real(d["lipschitz_bound"], "lipschitz_bound");
    if (v < 0.0) fail("lipschitz_bound", "must be >= 0");
    c.lipschitz_bound = v;
  }
  if (c.wants(Analysis::stability) && !c.effective_lipschitz()) {
    fail("lipschitz_bound", "required for stability with a non-affine custom field");
  }

  if (has("fractal_scales")) {
    const auto& v = d["fractal_scales"];
    if (!v.is_array()) fail("fractal_scales", "expected an array of step multiples");
    c.fractal_scales.clear();
    for (const auto& e : v) c.fractal_scales.push_back(at_least(as_count(e, "fractal_scales"), 1, "fractal_scales"));
  }
  if (has("fractal_tolerance")) {
    c.fractal_tolerance = positive(as_real(d["fractal_tolerance"], "fractal_tolerance"), "fractal_tolerance");
  }

  if (has("ensemble_output")) {
    const auto s = as_string(d["ensemble_output"], "ensemble_output");
    if (s == "none") c.ensemble_output = EnsembleOutput::none;
    else if (s == "csv") c.ensemble_output = EnsembleOutput::csv;
    else if (s == "binary") c.ensemble_output = EnsembleOutput::binary;
    else fail("ensemble_output", "expected none, csv or binary, got '" + s + "'");
  }
  c.record_stride = std::max<std::uint64_t>(1, c.n_steps / 1000);
  if (has("record_stride")) {
    c.record_stride = at_least(as_count(d["record_stride"], "record_stride"), 1, "record_stride");
  }
  if (has("convergence")) {
    if (!d["convergence"].is_boolean()) fail("convergence", "expected true or false");
    c.convergence = d["convergence"].get<bool>();
  }
  return c;
}

}  // namespace zitterwalk::cli
