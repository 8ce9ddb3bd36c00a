#include "zitterwalk/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "zitterwalk/error.hpp"

namespace zitterwalk {

namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void to_json(json& j, const TimeGrid& grid) {
  j = json{{"n_steps", grid.n_steps()}, {"horizon", grid.horizon()}, {"dt", grid.dt()}};
}

void to_json(json& j, const NoiseBiasReport& r) {
  json ac = json::array();
  for (double a : r.autocorrelation) ac.push_back(number(a));
  j = json{{"n", r.n},
           {"mean", number(r.mean)},
           {"p_plus", number(r.p_plus)},
           {"chi_square", number(r.chi_square)},
           {"chi_square_p_value", number(r.chi_square_p_value)},
           {"autocorrelation", ac},
           {"fair", r.fair()}};
}

void to_json(json& j, const HeisenbergReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"step", v.step}, {"path_id", v.path_id}, {"ratio", number(v.ratio)}});
  }
  json histogram = json::array();
  for (int b = 0; b < RatioHistogram::kBins; ++b) {
    if (r.histogram.counts[b] == 0) continue;
    histogram.push_back({{"lower", RatioHistogram::lower_edge(b)},
                         {"upper", RatioHistogram::lower_edge(b + 1)},
                         {"count", r.histogram.counts[b]}});
  }
  j = json{{"k_low", r.k_low},
           {"k_high", r.k_high},
           {"n_ratios", r.n_ratios},
           {"min_ratio", number(r.min_ratio)},
           {"max_ratio", number(r.max_ratio)},
           {"violation_count", r.violation_count},
           {"violations", violations},
           {"histogram", histogram},
           {"pass", r.pass}};
  if (!r.quantiles.empty()) {
    static constexpr double kLevels[] = {0.0, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0};
    json q = json::array();
    for (std::size_t i = 0; i < r.quantiles.size() && i < std::size(kLevels); ++i) {
      q.push_back({{"level", kLevels[i]}, {"ratio", number(r.quantiles[i])}});
    }
    j["quantiles"] = q;
  }
}

void to_json(json& j, const LinearFit& fit) {
  j = json{{"slope", number(fit.slope)},
           {"intercept", number(fit.intercept)},
           {"slope_standard_error", number(fit.slope_standard_error)},
           {"points", fit.points},
           {"total_weight", number(fit.total_weight)}};
}

void to_json(json& j, const MarkovCellTest& c) {
  j = json{{"step", c.step},
           {"time", c.time},
           {"bin", c.bin},
           {"n_up", c.n_up},
           {"n_down", c.n_down},
           {"z_mean", number(c.z_mean)},
           {"z_second_moment", number(c.z_second_moment)}};
}

void to_json(json& j, const MarkovReport& r) {
  j = json{{"verdict", to_string(r.verdict)},
           {"n_paths", r.n_paths},
           {"steps_analysed", r.steps_analysed},
           {"cells_tested", r.cells_tested},
           {"cells_skipped", r.cells_skipped},
           {"n_tests", r.n_tests},
           {"z_threshold", number(r.z_threshold)},
           {"worst_cell", r.worst_cell ? json(*r.worst_cell) : json(nullptr)},
           {"flagged_cells", r.flagged_cells},
           {"flagged", r.flagged},
           {"reason", r.reason}};
}

void to_json(json& j, const ComparisonPoint& p) {
  j = json{{"requested_time", p.requested_time},
           {"step", p.step},
           {"time", p.time},
           {"ks", number(p.ks)},
           {"wasserstein", number(p.wasserstein)},
           {"n_walk", p.n_walk},
           {"n_reference", p.n_reference},
           {"ks_threshold", number(p.ks_threshold)},
           {"wasserstein_threshold",
            p.wasserstein_threshold ? number(*p.wasserstein_threshold) : json(nullptr)},
           {"pass", p.pass}};
}

void to_json(json& j, const ComparisonReport& r) {
  j = json{{"points", r.points}, {"pass", r.pass()}};
}

void to_json(json& j, const StabilityReport& r) {
  j = json{{"sup_gap", number(r.sup_gap)},
           {"sup_gap_naive", number(r.sup_gap_naive)},
           {"sup_gap_step", r.sup_gap_step},
           {"drift_gap", number(r.drift_gap)},
           {"volatility_gap", number(r.volatility_gap)},
           {"initial_gap", number(r.initial_gap)},
           {"lipschitz_bound", number(r.lipschitz_bound)},
           {"observed_lipschitz", number(r.observed_lipschitz)},
           {"lipschitz_consistent", r.lipschitz_consistent},
           {"gronwall_bound", number(r.gronwall_bound)},
           {"bound_violations", r.bound_violations},
           {"pass", r.pass}};
}

void to_json(json& j, const ScaleSample& s) {
  j = json{{"scale", s.scale},
           {"steps", s.steps},
           {"mean_increment", number(s.mean_increment)},
           {"count", s.count}};
}

void to_json(json& j, const DimensionEstimate& e) {
  j = json{{"samples", e.samples},
           {"rejected_scales", e.rejected_scales},
           {"hurst", number(e.hurst)},
           {"intercept", number(e.intercept)},
           {"dimension", e.reliable ? number(e.dimension) : json(nullptr)},
           {"r_squared", number(e.r_squared)},
           {"scale_min", e.scale_min},
           {"scale_max", e.scale_max},
           {"reliable", e.reliable},
           {"reason", e.reason}};
}

json decomposition_summary(const DecompositionEstimate& estimate) {
  std::set<std::uint64_t> steps;
  double vol_min = std::numeric_limits<double>::infinity();
  double vol_max = -std::numeric_limits<double>::infinity();
  for (const auto& c : estimate.cells) {
    steps.insert(c.step);
    if (c.determined && !c.degenerate) {
      vol_min = std::min(vol_min, c.volatility);
      vol_max = std::max(vol_max, c.volatility);
    }
  }
  json j{{"n_xbins", estimate.n_xbins},
         {"min_count", estimate.min_count},
         {"dt", estimate.dt},
         {"n_paths", estimate.n_paths},
         {"steps_analysed", steps.size()},
         {"cells", estimate.cells.size()},
         {"determined_cells", estimate.determined_cells()},
         {"degenerate_cells", estimate.degenerate_cells()},
         {"volatility_min", number(vol_min)},
         {"volatility_max", number(vol_max)}};
  try {
    j["drift_regression"] = drift_regression(estimate);
  } catch (const InsufficientDataError&) {
    j["drift_regression"] = nullptr;
  }
  try {
    const auto moments = residual_moments(estimate);
    std::uint64_t within = 0;
    double worst_mean = 0.0;
    double worst_square = 0.0;
    for (const auto& m : moments) {
      if (m.within_tolerance) ++within;
      const double root = std::sqrt(static_cast<double>(m.count));
      worst_mean = std::max(worst_mean, std::abs(m.mean) * root / 4.0);
      worst_square = std::max(worst_square, std::abs(m.square_mean - 1.0) * root / 8.0);
    }
    j["residual_moments"] = {{"bins", moments.size()},
                             {"within_tolerance", within},
                             {"worst_mean_ratio", worst_mean},
                             {"worst_square_ratio", worst_square}};
  } catch (const InsufficientDataError&) {
    j["residual_moments"] = nullptr;
  }
  return j;
}

void write_ensemble_csv(std::ostream& out, const Ensemble& ensemble) {
  out << "path_id,t,x\n";
  const auto steps = ensemble.recorded_steps();
  const auto ids = ensemble.path_ids();
  for (std::uint64_t i = 0; i < ensemble.n_paths(); ++i) {
    for (std::uint64_t k : steps) {
      out << ids[i] << ',' << format(ensemble.grid().time(k)) << ','
          << format(ensemble.values_at(k)[i]) << '\n';
    }
  }
}

void write_decomposition_csv(std::ostream& out, const DecompositionEstimate& estimate) {
  out << "step,t,bin,lower,upper,center,count,mean_x,drift,volatility,eta_mean,"
         "eta_square_mean,determined,degenerate\n";
  for (const auto& c : estimate.cells) {
    out << c.step << ',' << format(c.time) << ',' << c.bin << ',' << format(c.lower) << ','
        << format(c.upper) << ',' << format(c.center) << ',' << c.count << ','
        << format(c.mean_x) << ',' << format(c.drift) << ',' << format(c.volatility) << ','
        << format(c.eta_mean) << ',' << format(c.eta_square_mean) << ','
        << (c.determined ? 1 : 0) << ',' << (c.degenerate ? 1 : 0) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
  out << "requested_time,step,t,ks,wasserstein,ks_threshold,pass\n";
  for (const auto& p : report.points) {
    out << format(p.requested_time) << ',' << p.step << ',' << format(p.time) << ','
        << format(p.ks) << ',' << format(p.wasserstein) << ',' << format(p.ks_threshold) << ','
        << (p.pass ? 1 : 0) << '\n';
  }
}

void write_scales_csv(std::ostream& out, const DimensionEstimate& estimate) {
  out << "scale,steps,mean_increment,count\n";
  for (const auto& s : estimate.samples) {
    out << format(s.scale) << ',' << s.steps << ',' << format(s.mean_increment) << ','
        << s.count << '\n';
  }
}

void write_stability_csv(std::ostream& out, const StabilityReport& report, const TimeGrid& grid,
                         std::uint64_t stride) {
  if (stride == 0) throw ConfigurationError("stability csv: stride must be >= 1");
  const auto row = [&](std::size_t k) {
    out << k << ',' << format(grid.time(k)) << ',' << format(report.gaps[k]) << ','
        << format(report.bounds[k]) << '\n';
  };
  out << "step,t,gap,bound\n";
  const std::size_t n = report.gaps.size();
  for (std::size_t k = 0; k < n; k += stride) row(k);
  if (n > 0 && (n - 1) % stride != 0) row(n - 1);
}

namespace {

class LeWriter {
 public:
  explicit LeWriter(const std::filesystem::path& file) : out_(file, std::ios::binary) {
    if (!out_) throw Error("cannot open " + file.string() + " for writing");
  }
  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f64(double v) { bytes(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw Error("write failed");
  }

 private:
  void bytes(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, n);
  }
  std::ofstream out_;
};

class LeReader {
 public:
  explicit LeReader(const std::filesystem::path& file) : in_(file, std::ios::binary) {
    if (!in_) throw ConfigurationError("cannot open ensemble file " + file.string());
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  double f64() { return std::bit_cast<double>(bytes(8)); }
  void raw(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw ConfigurationError("ensemble file is truncated");
  }

 private:
  std::uint64_t bytes(int n) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), n);
    if (!in_) throw ConfigurationError("ensemble file is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::ifstream in_;
};

constexpr std::uint32_t kFlagIncrements = 1u;
constexpr std::uint32_t kFlagGaussian = 2u;

}  // namespace

void write_ensemble_binary(const std::filesystem::path& file, const Ensemble& ensemble) {
  const auto steps = ensemble.recorded_steps();
  const bool increments = std::any_of(steps.begin(), steps.end(),
                                      [&](auto k) { return ensemble.has_increments(k); });
  LeWriter w(file);
  w.raw("ZWLK", 4);
  w.u32(kBinaryVersion);
  w.u64(ensemble.n_paths());
  w.u64(ensemble.grid().n_steps());
  w.f64(ensemble.grid().horizon());
  w.u64(ensemble.seed());
  w.u64(steps.size());
  w.u32((increments ? kFlagIncrements : 0u) |
        (ensemble.noise() == NoiseKind::gaussian ? kFlagGaussian : 0u));
  w.u32(0);
  for (auto k : steps) w.u64(k);
  for (auto id : ensemble.path_ids()) w.u64(id);
  for (auto k : steps) w.f64(ensemble.grid().time(k));
  for (std::uint64_t i = 0; i < ensemble.n_paths(); ++i) {
    for (auto k : steps) w.f64(ensemble.values_at(k)[i]);
  }
  if (increments) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::uint64_t i = 0; i < ensemble.n_paths(); ++i) {
      for (auto k : steps) w.f64(ensemble.has_increments(k) ? ensemble.increments_at(k)[i] : nan);
    }
  }
  w.finish();
}

Ensemble read_ensemble_binary(const std::filesystem::path& file, const CoefficientField& field) {
  LeReader r(file);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "ZWLK", 4) != 0) {
    throw ConfigurationError(file.string() + " is not a ZWLK ensemble file");
  }
  const auto version = r.u32();
  if (version != kBinaryVersion) {
    throw ConfigurationError("unsupported ZWLK version " + std::to_string(version));
  }
  const auto n_paths = r.u64();
  const auto n_steps = r.u64();
  const double horizon = r.f64();
  const auto seed = r.u64();
  const auto n_recorded = r.u64();
  const auto flags = r.u32();
  (void)r.u32();
  if (n_paths == 0 || n_recorded == 0 || n_recorded > n_steps + 1) {
    throw ConfigurationError("ZWLK header has inconsistent counts");
  }
  const TimeGrid grid(n_steps, horizon);
  std::vector<std::uint64_t> steps(n_recorded);
  for (auto& k : steps) k = r.u64();
  if (!std::is_sorted(steps.begin(), steps.end()) || steps.back() > n_steps ||
      std::adjacent_find(steps.begin(), steps.end()) != steps.end()) {
    throw ConfigurationError("ZWLK step indices must be increasing and on the grid");
  }
  std::vector<std::uint64_t> ids(n_paths);
  for (auto& id : ids) id = r.u64();
  for (std::uint64_t s = 0; s < n_recorded; ++s) (void)r.f64();

  const bool increments = (flags & kFlagIncrements) != 0;
  const bool all_steps = n_recorded == n_steps + 1;
  StoragePlan plan = increments && all_steps ? StoragePlan::dense()
                                             : StoragePlan::at_steps(steps, increments);
  Ensemble e(grid, field, InitialCondition::fixed(0.0), n_paths, seed,
             (flags & kFlagGaussian) ? NoiseKind::gaussian : NoiseKind::rademacher,
             std::move(plan));
  e.assign_path_ids(std::move(ids));
  for (std::uint64_t i = 0; i < n_paths; ++i) {
    for (std::uint64_t s = 0; s < n_recorded; ++s) e.mutable_values(s)[i] = r.f64();
  }
  if (increments) {
    for (std::uint64_t i = 0; i < n_paths; ++i) {
      for (std::uint64_t s = 0; s < n_recorded; ++s) {
        const double v = r.f64();
        auto column = e.mutable_increments(s);
        if (!column.empty()) column[i] = v;
      }
    }
  }
  return e;
}

}  // namespace zitterwalk
