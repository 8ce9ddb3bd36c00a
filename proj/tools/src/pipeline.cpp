#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

#include "zitterwalk/equivalence.hpp"
#include "zitterwalk/error.hpp"
#include "zitterwalk/estimator.hpp"
#include "zitterwalk/fractal.hpp"
#include "zitterwalk/io.hpp"
#include "zitterwalk/walker.hpp"

namespace zitterwalk::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// The reference and calibration ensembles must not share initial draws with the walk.
constexpr std::uint64_t kReferenceSeedOffset = 0x5851f42d4c957f2dULL;
constexpr std::uint64_t kCalibrationSeedOffset = 0x14057b7ef767814fULL;
constexpr std::uint64_t kMaxCsvRows = 10'000;
constexpr double kTargetDimension = 2.0;

void say(const RunOptions& o, const std::string& line) {
  if (o.log) *o.log << "zitterwalk: " << line << '\n' << std::flush;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + file.string());
}

template <class Writer>
void write_text(const fs::path& file, Writer&& writer) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  writer(out);
  if (!out) throw Error("write failed for " + file.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigurationError("cannot create output directory " + dir.string());
  }
}

std::uint64_t analysis_stride(const RunConfig& c, const TimeGrid& g) {
  return std::max<std::uint64_t>(1, g.n_steps() / c.analysis_steps);
}

std::vector<double> fractal_deltas(const RunConfig& c, const TimeGrid& g) {
  std::vector<double> d;
  for (auto m : c.fractal_scales) d.push_back(static_cast<double>(m) * g.dt());
  return d;
}

std::vector<std::uint64_t> comparison_steps(const RunConfig& c, const TimeGrid& g) {
  std::vector<std::uint64_t> s;
  for (double t : c.comparison_times) s.push_back(g.nearest_step(t));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

CoefficientField perturbed(const CoefficientField& f, double db, double ds) {
  if (f.kind() == FieldKind::constant) {
    return CoefficientField::constant(f.constant_drift() + db, f.constant_volatility() + ds);
  }
  return CoefficientField::user([f, db](double t, double x) { return f.drift(t, x) + db; },
                                [f, ds](double t, double x) { return f.volatility(t, x) + ds; },
                                f.label() + "+offset");
}

/// Forwards every cross-section to several observers, in order.
class FanOut final : public StepObserver {
 public:
  explicit FanOut(std::vector<StepObserver*> targets) : targets_(std::move(targets)) {}
  void observe(const CrossSection& s) override {
    for (auto* t : targets_) t->observe(s);
  }

 private:
  std::vector<StepObserver*> targets_;
};

struct Observers {
  std::optional<HeisenbergMonitor> heisenberg;
  std::optional<DecompositionAccumulator> decomposition;
  std::optional<MarkovAccumulator> markov;
  std::optional<IncrementScaleAccumulator> fractal;

  Observers(const RunConfig& c, const TimeGrid& g, bool with_fractal) {
    const auto stride = analysis_stride(c, g);
    if (c.wants(Analysis::heisenberg)) heisenberg.emplace(c.k_low, c.k_high);
    if (c.wants(Analysis::decompose)) {
      decomposition.emplace(c.n_xbins, c.min_count, DecompositionOptions{stride, false});
    }
    if (c.wants(Analysis::markov)) {
      MarkovOptions o;
      o.step_stride = stride;
      markov.emplace(c.n_xbins, o);
    }
    if (with_fractal && c.wants(Analysis::fractal)) {
      const auto deltas = fractal_deltas(c, g);
      fractal.emplace(g, deltas);
    }
  }

  [[nodiscard]] std::vector<StepObserver*> list() {
    std::vector<StepObserver*> out;
    if (heisenberg) out.push_back(&*heisenberg);
    if (decomposition) out.push_back(&*decomposition);
    if (markov) out.push_back(&*markov);
    if (fractal) out.push_back(&*fractal);
    return out;
  }
};

struct Outcome {
  Analysis analysis;
  bool pass = false;
  json document;
};

json envelope(Analysis a, bool pass, json report) {
  return json{{"schema_version", kSchemaVersion},
              {"analysis", to_string(a)},
              {"pass", pass},
              {"report", std::move(report)}};
}

Outcome heisenberg_outcome(const HeisenbergReport& r) {
  return {Analysis::heisenberg, r.pass, envelope(Analysis::heisenberg, r.pass, r)};
}

Outcome decomposition_outcome(const RunConfig& c, const CoefficientField& field,
                              const DecompositionEstimate& est, const fs::path& dir) {
  json summary = decomposition_summary(est);
  json checks = json::object();
  std::vector<std::string> failures;

  if (est.determined_cells() == 0) {
    failures.push_back("no bin reached min_count; raise n_paths or lower min_count");
  }
  if (est.degenerate_cells() > 0) failures.push_back("degenerate bins with zero volatility");
  if (const auto& m = summary["residual_moments"];
      m.is_object() && m["within_tolerance"].get<std::uint64_t>() != m["bins"].get<std::uint64_t>()) {
    failures.push_back("residual moments outside tolerance");
  }

  double worst = 0.0;
  for (const auto& cell : est.cells) {
    if (!cell.determined || cell.degenerate) continue;
    const double truth = field.volatility(cell.time, cell.mean_x);
    worst = std::max(worst, std::abs(cell.volatility / truth - 1.0));
  }
  checks["volatility"] = {{"worst_relative_error", number(worst)},
                          {"tolerance", c.volatility_tolerance},
                          {"pass", worst <= c.volatility_tolerance}};
  if (worst > c.volatility_tolerance) failures.push_back("volatility estimate off the field");

  checks["drift_slope"] = nullptr;
  if (const auto slope = c.affine_drift_slope(); slope && summary["drift_regression"].is_object()) {
    const auto fit = drift_regression(est);
    // the drift is O(dt^-1/2) noisier than the volatility; allow its sampling error
    const double allowance = c.drift_slope_tolerance + 4.0 * fit.slope_standard_error;
    const bool ok = std::abs(fit.slope - *slope) <= allowance;
    checks["drift_slope"] = {{"expected", *slope},
                             {"estimated", number(fit.slope)},
                             {"standard_error", number(fit.slope_standard_error)},
                             {"allowance", number(allowance)},
                             {"pass", ok}};
    if (!ok) failures.push_back("drift slope differs from the field");
  }

  const bool pass = failures.empty();
  summary["checks"] = checks;
  summary["failures"] = failures;
  write_text(dir / "decompose.csv", [&](std::ostream& o) { write_decomposition_csv(o, est); });
  auto doc = envelope(Analysis::decompose, pass, summary);
  doc["csv"] = "decompose.csv";
  return {Analysis::decompose, pass, doc};
}

Outcome markov_outcome(const MarkovReport& r) {
  const bool pass = r.verdict != MarkovVerdict::violated;
  return {Analysis::markov, pass, envelope(Analysis::markov, pass, r)};
}

Outcome fractal_outcome(const RunConfig& c, const std::function<DimensionEstimate()>& estimate,
                        const fs::path& dir) {
  DimensionEstimate est;
  try {
    est = estimate();
  } catch (const InsufficientDataError& e) {
    json report{{"reliable", false}, {"dimension", nullptr}, {"reason", e.what()}};
    return {Analysis::fractal, false, envelope(Analysis::fractal, false, report)};
  }
  const bool pass = est.reliable && std::abs(est.dimension - kTargetDimension) <= c.fractal_tolerance;
  json report = est;
  write_text(dir / "fractal.csv", [&](std::ostream& o) { write_scales_csv(o, est); });
  auto doc = envelope(Analysis::fractal, pass, report);
  doc["target_dimension"] = kTargetDimension;
  doc["tolerance"] = c.fractal_tolerance;
  doc["csv"] = "fractal.csv";
  return {Analysis::fractal, pass, doc};
}

Outcome equivalence_outcome(const RunConfig& c, const Ensemble& walk, const RunOptions& o,
                            const fs::path& dir) {
  const auto field = c.field();
  const auto x0 = c.initial_condition();
  const auto ref_grid = make_grid(c.reference_steps, walk.grid().horizon());
  const std::uint64_t ref_seed = walk.seed() + kReferenceSeedOffset;
  say(o, "gaussian reference: " + std::to_string(walk.n_paths()) + " paths x " +
             std::to_string(ref_grid.n_steps()) + " steps");
  SimulationOptions so;
  so.storage = StoragePlan::at_steps(comparison_steps(c, ref_grid), false);
  so.threads = o.threads;
  const auto reference = gaussian_reference(field, x0, ref_grid, walk.n_paths(), ref_seed, so);

  EquivalenceThresholds thresholds;
  thresholds.wasserstein = c.wasserstein_threshold;
  json calibration = nullptr;
  if (c.ks_threshold) {
    thresholds.ks = {*c.ks_threshold};
  } else {
    say(o, "calibrating KS threshold over " + std::to_string(c.calibration_pairs) + " pairs");
    // two-sample KS under the null does not depend on the (continuous) marginal law,
    // so a coarse grid calibrates the same statistic
    const auto cal = calibrate_ks_threshold(
        field, x0, make_grid(c.calibration_steps, walk.grid().horizon()), walk.n_paths(),
        c.comparison_times, c.calibration_pairs, c.calibration_quantile,
        walk.seed() + kCalibrationSeedOffset, o.threads);
    json lattice = json::array();
    for (std::size_t j = 0; j < c.comparison_times.size(); ++j) {
      const auto m = walk.grid().nearest_step(c.comparison_times[j]);
      const double allowance = m == 0 ? 0.0 : rademacher_lattice_ks(m);
      thresholds.ks.push_back(cal.thresholds[j] + allowance);
      lattice.push_back(allowance);
    }
    calibration = {{"pairs", c.calibration_pairs},
                   {"quantile", c.calibration_quantile},
                   {"grid_steps", c.calibration_steps},
                   {"null_quantiles", cal.thresholds},
                   {"lattice_allowance", lattice}};
  }
  const auto report = equivalence_report(walk, reference, c.comparison_times, thresholds);
  write_text(dir / "equivalence.csv", [&](std::ostream& out) { write_comparison_csv(out, report); });
  auto doc = envelope(Analysis::equivalence, report.pass(), report);
  doc["reference"] = {{"n_steps", ref_grid.n_steps()}, {"seed", ref_seed}, {"noise", "gaussian"}};
  doc["calibration"] = calibration;
  doc["csv"] = "equivalence.csv";
  return {Analysis::equivalence, report.pass(), doc};
}

Outcome stability_outcome(const RunConfig& c, const TimeGrid& grid, std::uint64_t seed,
                          const fs::path& dir) {
  const auto f1 = c.field();
  const auto f2 = perturbed(f1, c.drift_offset, c.volatility_offset);
  const double x01 = c.initial_center();
  const double x02 = x01 + c.initial_gap;
  const auto r = stability_check(f1, f2, x01, x02, grid, seed, *c.effective_lipschitz());
  const bool pass = r.pass && r.lipschitz_consistent;
  const auto stride = std::max<std::uint64_t>(1, grid.n_steps() / kMaxCsvRows);
  write_text(dir / "stability.csv", [&](std::ostream& o) { write_stability_csv(o, r, grid, stride); });
  auto doc = envelope(Analysis::stability, pass, r);
  doc["offsets"] = {{"drift", c.drift_offset},
                    {"volatility", c.volatility_offset},
                    {"initial", c.initial_gap}};
  doc["csv"] = "stability.csv";
  return {Analysis::stability, pass, doc};
}

json simulation_info(const Ensemble& e) {
  return {{"n_paths", e.n_paths()},
          {"grid", e.grid()},
          {"seed", e.seed()},
          {"noise", to_string(e.noise())},
          {"field", e.field().label()}};
}

std::string ensemble_file_name(EnsembleOutput o) {
  return o == EnsembleOutput::csv ? "ensemble.csv" : "ensemble.zwlk";
}

void write_ensemble(const Ensemble& e, EnsembleOutput output, const fs::path& dir) {
  if (output == EnsembleOutput::csv) {
    write_text(dir / "ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, e); });
  } else {
    write_ensemble_binary(dir / "ensemble.zwlk", e);
  }
}

StoragePlan walk_storage(const RunConfig& c, const TimeGrid& g, bool keep_ensemble) {
  if (keep_ensemble && c.record_stride == 1) return StoragePlan::dense();
  std::vector<std::uint64_t> steps;
  if (c.wants(Analysis::equivalence)) steps = comparison_steps(c, g);
  if (keep_ensemble) {
    for (std::uint64_t k = 0; k <= g.n_steps(); k += c.record_stride) steps.push_back(k);
    steps.push_back(g.n_steps());
  }
  if (steps.empty()) return StoragePlan::none();
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return StoragePlan::at_steps(std::move(steps), false);
}

int finish(const RunConfig& c, const std::string& command, const json& simulation,
           const std::vector<Outcome>& outcomes, const std::vector<std::string>& extra_files) {
  json analyses = json::object();
  bool all = true;
  std::vector<std::string> files = extra_files;
  for (const auto& o : outcomes) {
    const std::string name(to_string(o.analysis));
    write_json(c.out_dir / (name + ".json"), o.document);
    analyses[name] = {{"pass", o.pass}, {"report", name + ".json"}};
    files.push_back(name + ".json");
    if (o.document.contains("csv")) files.push_back(o.document["csv"].get<std::string>());
    all = all && o.pass;
  }
  const int code = all ? kExitPass : kExitFail;
  json summary{{"schema_version", kSchemaVersion},
               {"tool", "zitterwalk"},
               {"command", command},
               {"generated_at", utc_timestamp()},
               {"config", c.to_json()},
               {"simulation", simulation},
               {"analyses", analyses},
               {"files", files},
               {"pass", all},
               {"exit_code", code}};
  write_json(c.out_dir / "summary.json", summary);
  return code;
}

/// Analyses shared by run and analyze once the observers have seen every step.
std::vector<Outcome> collect(const RunConfig& c, Observers& obs, const Ensemble& walk,
                             const std::function<DimensionEstimate()>& fractal,
                             const RunOptions& o) {
  std::vector<Outcome> out;
  for (Analysis a : c.analyses) {
    switch (a) {
      case Analysis::heisenberg: out.push_back(heisenberg_outcome(obs.heisenberg->report())); break;
      case Analysis::decompose:
        out.push_back(decomposition_outcome(c, walk.field(), obs.decomposition->estimate(), c.out_dir));
        break;
      case Analysis::markov: out.push_back(markov_outcome(obs.markov->report())); break;
      case Analysis::equivalence: out.push_back(equivalence_outcome(c, walk, o, c.out_dir)); break;
      case Analysis::stability:
        say(o, "coupled stability walk");
        out.push_back(stability_outcome(c, walk.grid(), walk.seed(), c.out_dir));
        break;
      case Analysis::fractal: out.push_back(fractal_outcome(c, fractal, c.out_dir)); break;
    }
    say(o, std::string(to_string(a)) + (out.back().pass ? ": pass" : ": FAIL"));
  }
  return out;
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run(const RunConfig& c, const RunOptions& o) {
  prepare_out_dir(c.out_dir);
  const auto grid = c.grid();
  const bool keep = c.ensemble_output != EnsembleOutput::none;
  Observers obs(c, grid, true);
  SimulationOptions so;
  so.storage = walk_storage(c, grid, keep);
  so.observers = obs.list();
  so.threads = o.threads;
  say(o, "simulating " + std::to_string(c.n_paths) + " paths x " + std::to_string(c.n_steps) +
             " steps (" + std::string(to_string(c.scenario)) + ")");
  const auto walk = simulate_ensemble(c.field(), c.initial_condition(), grid, c.n_paths, c.seed, so);
  std::vector<std::string> files;
  if (keep) {
    write_ensemble(walk, c.ensemble_output, c.out_dir);
    files.push_back(ensemble_file_name(c.ensemble_output));
  }
  const auto outcomes = collect(c, obs, walk, [&] { return obs.fractal->estimate(); }, o);
  return finish(c, "run", simulation_info(walk), outcomes, files);
}

int simulate(const RunConfig& config, const RunOptions& o) {
  RunConfig c = config;
  if (c.ensemble_output == EnsembleOutput::none) c.ensemble_output = EnsembleOutput::binary;
  c.analyses.clear();
  prepare_out_dir(c.out_dir);
  SimulationOptions so;
  so.storage = walk_storage(c, c.grid(), true);
  so.threads = o.threads;
  say(o, "simulating " + std::to_string(c.n_paths) + " paths x " + std::to_string(c.n_steps) + " steps");
  const auto walk = simulate_ensemble(c.field(), c.initial_condition(), c.grid(), c.n_paths, c.seed, so);
  write_ensemble(walk, c.ensemble_output, c.out_dir);
  json doc{{"schema_version", kSchemaVersion},
           {"tool", "zitterwalk"},
           {"command", "simulate"},
           {"generated_at", utc_timestamp()},
           {"config", c.to_json()},
           {"simulation", simulation_info(walk)},
           {"recorded_steps", walk.recorded_steps().size()},
           {"dense", walk.dense()},
           {"ensemble", ensemble_file_name(c.ensemble_output)}};
  write_json(c.out_dir / "simulation.json", doc);
  return kExitPass;
}

int analyze(const RunConfig& config, const fs::path& input, const RunOptions& o) {
  const auto walk = read_ensemble_binary(input, config.field());
  RunConfig c = config;
  c.n_steps = walk.grid().n_steps();
  c.horizon = walk.grid().horizon();
  c.n_paths = walk.n_paths();
  c.seed = walk.seed();
  prepare_out_dir(c.out_dir);
  say(o, "analysing " + input.string() + " (" + std::to_string(c.n_paths) + " paths x " +
             std::to_string(c.n_steps) + " steps)");
  Observers obs(c, walk.grid(), walk.dense());
  if (auto list = obs.list(); !list.empty()) {
    FanOut fan(std::move(list));
    walk.replay(fan);
  }
  const auto deltas = fractal_deltas(c, walk.grid());
  const auto outcomes = collect(
      c, obs, walk,
      [&] { return obs.fractal ? obs.fractal->estimate() : estimate_dimension(walk, deltas); }, o);
  json sim = simulation_info(walk);
  sim["input"] = input.filename().string();
  return finish(c, "analyze", sim, outcomes, {});
}

int run_convergence(const RunConfig& config, const RunOptions& o) {
  prepare_out_dir(config.out_dir);
  json levels = json::array();
  json trends = {{"n_steps", json::array()}};
  auto push = [&](const std::string& key, json v) {
    if (!trends.contains(key)) trends[key] = json::array();
    trends[key].push_back(std::move(v));
  };
  bool all = true;
  for (std::uint64_t n : {10'000ULL, 100'000ULL, 1'000'000ULL}) {
    RunConfig c = config;
    c.n_steps = n;
    c.reference_steps = std::min(config.reference_steps, n);
    c.ensemble_output = EnsembleOutput::none;
    c.convergence = false;
    c.out_dir = config.out_dir / "convergence" / ("n_steps_" + std::to_string(n));
    say(o, "convergence level n_steps = " + std::to_string(n));
    const int code = run(c, o);
    all = all && code == kExitPass;
    trends["n_steps"].push_back(n);

    const auto read = [&](const std::string& name) -> json {
      std::ifstream in(c.out_dir / (name + ".json"));
      return in ? json::parse(in) : json(nullptr);
    };
    json verdicts = json::object();
    for (Analysis a : c.analyses) {
      const std::string name(to_string(a));
      const json doc = read(name);
      verdicts[name] = doc.is_null() ? json(nullptr) : doc["pass"];
      if (doc.is_null()) continue;
      const json& r = doc["report"];
      switch (a) {
        case Analysis::heisenberg:
          push("heisenberg_min_ratio", r["min_ratio"]);
          push("heisenberg_max_ratio", r["max_ratio"]);
          break;
        case Analysis::decompose:
          push("drift_slope", r["drift_regression"].is_object() ? r["drift_regression"]["slope"] : json(nullptr));
          push("volatility_worst_relative_error", r["checks"]["volatility"]["worst_relative_error"]);
          break;
        case Analysis::markov:
          push("markov_worst_z", r["worst_cell"].is_object()
                                     ? json(std::max(std::abs(r["worst_cell"]["z_mean"].get<double>()),
                                                     std::abs(r["worst_cell"]["z_second_moment"].get<double>())))
                                     : json(nullptr));
          break;
        case Analysis::equivalence: {
          double ks = 0.0;
          double w = 0.0;
          for (const auto& p : r["points"]) {
            if (p["ks"].is_number()) ks = std::max(ks, p["ks"].get<double>());
            if (p["wasserstein"].is_number()) w = std::max(w, p["wasserstein"].get<double>());
          }
          push("ks_max", ks);
          push("wasserstein_max", w);
          break;
        }
        case Analysis::stability:
          push("stability_sup_gap", r["sup_gap"]);
          push("stability_gronwall_bound", r["gronwall_bound"]);
          break;
        case Analysis::fractal:
          push("fractal_dimension", r["dimension"]);
          push("fractal_hurst", r.contains("hurst") ? r["hurst"] : json(nullptr));
          break;
      }
    }
    levels.push_back({{"n_steps", n},
                      {"dt", c.grid().dt()},
                      {"directory", fs::relative(c.out_dir, config.out_dir).generic_string()},
                      {"exit_code", code},
                      {"verdicts", verdicts}});
  }
  const int code = all ? kExitPass : kExitFail;
  write_json(config.out_dir / "convergence.json",
             {{"schema_version", kSchemaVersion},
              {"tool", "zitterwalk"},
              {"command", "run --convergence"},
              {"generated_at", utc_timestamp()},
              {"config", config.to_json()},
              {"levels", levels},
              {"trends", trends},
              {"pass", all},
              {"exit_code", code}});
  return code;
}

int noise_check(std::uint64_t seed, std::uint64_t path_id, std::size_t n,
                const std::optional<fs::path>& out_file, std::ostream& out) {
  const auto r = noise_bias_report(NoiseStream(seed, path_id), n);
  json doc{{"schema_version", kSchemaVersion},
           {"tool", "zitterwalk"},
           {"command", "noise-check"},
           {"seed", seed},
           {"path_id", path_id},
           {"report", r},
           {"pass", r.fair()}};
  out << doc.dump(2) << '\n';
  if (out_file) {
    if (out_file->has_parent_path()) prepare_out_dir(out_file->parent_path());
    write_json(*out_file, doc);
  }
  return r.fair() ? kExitPass : kExitFail;
}

int guarded(const std::function<int()>& body, std::ostream& err,
            const std::optional<fs::path>& out_dir) {
  int code = kExitRuntime;
  std::string kind;
  std::string message;
  json site = nullptr;
  try {
    return body();
  } catch (const ConfigurationError& e) {
    code = kExitConfig;
    kind = "configuration";
    message = e.what();
  } catch (const ResolutionError& e) {
    code = kExitConfig;
    kind = "resolution";
    message = e.what();
  } catch (const DegenerateVolatilityError& e) {
    kind = "degenerate_volatility";
    message = e.what();
    site = {{"t", e.site().t}, {"x", number(e.site().x)}, {"step", e.site().step ? json(*e.site().step) : json(nullptr)},
            {"path_id", e.site().path_id ? json(*e.site().path_id) : json(nullptr)},
            {"volatility", number(e.volatility())}};
  } catch (const NumericDomainError& e) {
    kind = "numeric_domain";
    message = e.what();
    site = {{"t", e.site().t}, {"x", number(e.site().x)}, {"step", e.site().step ? json(*e.site().step) : json(nullptr)},
            {"path_id", e.site().path_id ? json(*e.site().path_id) : json(nullptr)}};
  } catch (const InsufficientDataError& e) {
    kind = "insufficient_data";
    message = e.what();
  } catch (const std::bad_alloc&) {
    kind = "out_of_memory";
    message = "out of memory";
  } catch (const std::exception& e) {
    kind = "runtime";
    message = e.what();
  }
  err << "zitterwalk: " << kind << " error: " << message << '\n';
  if (out_dir) {
    try {
      prepare_out_dir(*out_dir);
      write_json(*out_dir / "summary.json", {{"schema_version", kSchemaVersion},
                                             {"tool", "zitterwalk"},
                                             {"generated_at", utc_timestamp()},
                                             {"pass", false},
                                             {"exit_code", code},
                                             {"error", {{"kind", kind}, {"message", message}, {"site", site}}}});
    } catch (const std::exception&) {
      // the diagnostic on err is the primary channel
    }
  }
  return code;
}

}  // namespace zitterwalk::cli
