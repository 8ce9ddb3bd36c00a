#include "zitterwalk/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "zitterwalk/error.hpp"
#include "zitterwalk/noise.hpp"

namespace zitterwalk {

namespace {

// Dense storage above this many bytes is refused; stream through observers instead.
constexpr double kMaxStorageBytes = 3.0e9;

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ConfigurationError(std::string(what) + ": non-finite value at index " +
                               std::to_string(i));
    }
  }
}

}  // namespace

Path::Path(TimeGrid grid, std::vector<double> values, std::uint64_t path_id)
    : grid_(grid), path_id_(path_id), stride_(1), values_(std::move(values)) {
  if (values_.size() != grid_.n_points()) {
    throw ConfigurationError("path needs n_steps + 1 = " + std::to_string(grid_.n_points()) +
                             " values, got " + std::to_string(values_.size()));
  }
  require_finite(values_, "path");
  increments_.resize(grid_.n_steps());
  for (std::size_t k = 0; k < increments_.size(); ++k) {
    increments_[k] = values_[k + 1] - values_[k];
  }
}

Path::Path(TimeGrid grid, std::vector<double> values, std::vector<double> increments,
           std::uint64_t path_id)
    : grid_(grid),
      path_id_(path_id),
      stride_(1),
      values_(std::move(values)),
      increments_(std::move(increments)) {
  if (values_.size() != grid_.n_points() || increments_.size() != grid_.n_steps()) {
    throw ConfigurationError("path: values/increments do not match the grid");
  }
  require_finite(values_, "path");
  require_finite(increments_, "path increments");
}

Path Path::thinned(TimeGrid grid, std::vector<double> values, std::uint64_t stride,
                   std::uint64_t path_id) {
  if (stride == 0 || grid.n_steps() % stride != 0) {
    throw ConfigurationError("thinning stride must divide n_steps");
  }
  if (values.size() != grid.n_steps() / stride + 1) {
    throw ConfigurationError("thinned path has the wrong number of values");
  }
  require_finite(values, "path");
  Path p(grid, stride, path_id);
  p.values_ = std::move(values);
  return p;
}

InitialCondition InitialCondition::fixed(double value) {
  if (!std::isfinite(value)) throw ConfigurationError("x0 must be finite");
  return {Kind::fixed, value, 0.0};
}

InitialCondition InitialCondition::normal(double mean, double stddev) {
  if (!std::isfinite(mean) || !(std::isfinite(stddev) && stddev >= 0.0)) {
    throw ConfigurationError("x0 normal: mean finite, stddev finite and >= 0 required");
  }
  return {Kind::normal, mean, stddev};
}

InitialCondition InitialCondition::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi >= lo)) {
    throw ConfigurationError("x0 uniform: finite bounds with hi >= lo required");
  }
  return {Kind::uniform, lo, hi};
}

double InitialCondition::sample(std::uint64_t seed, std::uint64_t path_id) const noexcept {
  switch (kind_) {
    case Kind::fixed: return a_;
    case Kind::uniform: {
      const auto w = noise_detail::draw_block(seed, path_id, 0, NoiseDomain::initial_condition);
      return a_ + (b_ - a_) * noise_detail::open_unit52(w[0], w[1]);
    }
    case Kind::normal: {
      const auto w = noise_detail::draw_block(seed, path_id, 0, NoiseDomain::initial_condition);
      const double u1 = noise_detail::open_unit52(w[0], w[1]);
      const double u2 = noise_detail::open_unit52(w[2], w[3]);
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      return a_ + b_ * z;
    }
  }
  return a_;
}

std::string to_string(InitialCondition::Kind kind) {
  switch (kind) {
    case InitialCondition::Kind::fixed: return "fixed";
    case InitialCondition::Kind::normal: return "normal";
    case InitialCondition::Kind::uniform: return "uniform";
  }
  return "fixed";
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::rademacher ? "rademacher" : "gaussian";
}

Ensemble::Ensemble(TimeGrid grid, CoefficientField field, InitialCondition x0,
                   std::uint64_t n_paths, std::uint64_t seed, NoiseKind noise, StoragePlan plan)
    : grid_(grid),
      field_(std::move(field)),
      x0_(x0),
      n_paths_(n_paths),
      seed_(seed),
      noise_(noise),
      plan_(std::move(plan)) {
  if (n_paths_ == 0) throw ConfigurationError("ensemble needs n_paths >= 1");
  path_ids_.resize(n_paths_);
  for (std::uint64_t i = 0; i < n_paths_; ++i) path_ids_[i] = i;

  const std::uint64_t n = grid_.n_steps();
  switch (plan_.mode) {
    case StoragePlan::Mode::dense:
      steps_.resize(n + 1);
      for (std::uint64_t k = 0; k <= n; ++k) steps_[k] = k;
      step_has_increment_.assign(n + 1, true);
      step_has_increment_[n] = false;
      break;
    case StoragePlan::Mode::thinned:
      if (plan_.stride == 0 || n % plan_.stride != 0) {
        throw ConfigurationError("storage stride must divide n_steps");
      }
      for (std::uint64_t k = 0; k <= n; k += plan_.stride) steps_.push_back(k);
      step_has_increment_.assign(steps_.size(), plan_.stride == 1);
      if (plan_.stride == 1) step_has_increment_.back() = false;
      break;
    case StoragePlan::Mode::selected: {
      std::set<std::uint64_t> unique(plan_.steps.begin(), plan_.steps.end());
      for (std::uint64_t k : unique) {
        if (k > n) throw ConfigurationError("storage step beyond grid");
        steps_.push_back(k);
        step_has_increment_.push_back(plan_.keep_increments && k < n);
      }
      break;
    }
    case StoragePlan::Mode::none: break;
  }

  const bool any_increments =
      std::find(step_has_increment_.begin(), step_has_increment_.end(), true) !=
      step_has_increment_.end();
  const double bytes = static_cast<double>(steps_.size()) * static_cast<double>(n_paths_) *
                       (any_increments ? 16.0 : 8.0);
  if (bytes > kMaxStorageBytes) {
    throw ConfigurationError(
        "requested ensemble storage (" + std::to_string(bytes / 1e9) +
        " GB) is too large; thin the storage or use streaming observers");
  }
  values_.assign(steps_.size() * n_paths_, 0.0);
  if (any_increments) {
    increments_.assign(steps_.size() * n_paths_, std::numeric_limits<double>::quiet_NaN());
  }
}

Ensemble Ensemble::from_paths(const std::vector<Path>& paths, CoefficientField field,
                              std::uint64_t seed) {
  if (paths.empty()) throw InsufficientDataError("ensemble from zero paths");
  const TimeGrid grid = paths.front().grid();
  Ensemble e(grid, std::move(field), InitialCondition::fixed(paths.front().values()[0]),
             paths.size(), seed, NoiseKind::rademacher, StoragePlan::dense());
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Path& p = paths[i];
    if (!(p.grid() == grid)) throw ConfigurationError("paths must share one grid");
    if (!p.dense()) throw ResolutionError("ensemble assembly needs dense paths");
    if (!ids.insert(p.path_id()).second) throw ConfigurationError("duplicate path_id");
    e.path_ids_[i] = p.path_id();
    for (std::uint64_t k = 0; k <= grid.n_steps(); ++k) {
      e.values_[k * e.n_paths_ + i] = p.values()[k];
      if (k < grid.n_steps()) e.increments_[k * e.n_paths_ + i] = p.increments()[k];
    }
  }
  return e;
}

bool Ensemble::dense() const noexcept {
  return steps_.size() == grid_.n_points() && !increments_.empty();
}

std::size_t Ensemble::slot(std::uint64_t k) const noexcept {
  const auto it = std::lower_bound(steps_.begin(), steps_.end(), k);
  if (it == steps_.end() || *it != k) return npos;
  return static_cast<std::size_t>(it - steps_.begin());
}

bool Ensemble::has_step(std::uint64_t k) const noexcept { return slot(k) != npos; }

bool Ensemble::has_increments(std::uint64_t k) const noexcept {
  const std::size_t s = slot(k);
  return s != npos && step_has_increment_[s];
}

std::span<const double> Ensemble::values_at(std::uint64_t k) const {
  const std::size_t s = slot(k);
  if (s == npos) {
    throw ResolutionError("step " + std::to_string(k) + " was not recorded in this ensemble");
  }
  return {values_.data() + s * n_paths_, n_paths_};
}

std::span<const double> Ensemble::increments_at(std::uint64_t k) const {
  const std::size_t s = slot(k);
  if (s == npos || !step_has_increment_[s]) {
    throw ResolutionError("increments leaving step " + std::to_string(k) +
                          " were not recorded in this ensemble");
  }
  return {increments_.data() + s * n_paths_, n_paths_};
}

std::span<double> Ensemble::mutable_values(std::size_t s) noexcept {
  return {values_.data() + s * n_paths_, n_paths_};
}

std::span<double> Ensemble::mutable_increments(std::size_t s) noexcept {
  if (increments_.empty()) return {};
  return {increments_.data() + s * n_paths_, n_paths_};
}

void Ensemble::assign_path_ids(std::vector<std::uint64_t> ids) {
  if (ids.size() != n_paths_) throw ConfigurationError("path id count does not match n_paths");
  std::set<std::uint64_t> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw ConfigurationError("duplicate path_id");
  path_ids_ = std::move(ids);
}

CrossSection Ensemble::section(std::uint64_t k) const {
  CrossSection cs;
  cs.step = k;
  cs.t = grid_.time(k);
  cs.dt = grid_.dt();
  cs.values = values_at(k);
  if (has_increments(k)) cs.increments = increments_at(k);
  if (k > 0 && has_increments(k - 1)) cs.previous_increments = increments_at(k - 1);
  return cs;
}

void Ensemble::replay(StepObserver& observer) const {
  if (!dense()) {
    throw ResolutionError("analysis needs every increment; ensemble storage is not dense");
  }
  for (std::uint64_t k = 0; k <= grid_.n_steps(); ++k) observer.observe(section(k));
}

Path Ensemble::path(std::uint64_t i) const {
  if (i >= n_paths_) throw ConfigurationError("path index out of range");
  if (dense()) {
    std::vector<double> values(grid_.n_points());
    std::vector<double> increments(grid_.n_steps());
    for (std::uint64_t k = 0; k <= grid_.n_steps(); ++k) {
      values[k] = values_[k * n_paths_ + i];
      if (k < grid_.n_steps()) increments[k] = increments_[k * n_paths_ + i];
    }
    return Path(grid_, std::move(values), std::move(increments), path_ids_[i]);
  }
  if (plan_.mode == StoragePlan::Mode::thinned) {
    std::vector<double> values(steps_.size());
    for (std::size_t s = 0; s < steps_.size(); ++s) values[s] = values_[s * n_paths_ + i];
    return Path::thinned(grid_, std::move(values), plan_.stride, path_ids_[i]);
  }
  throw ResolutionError("ensemble storage does not hold whole paths");
}

}  // namespace zitterwalk
