#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zitterwalk/coefficients.hpp"
#include "zitterwalk/grid.hpp"

namespace zitterwalk {

/// One realisation x on the grid.
///
/// A dense path stores every grid value together with the increments exactly as
/// the walker produced them, so per-step statistics do not suffer cancellation
/// from re-differencing stored values. A thinned path keeps every stride-th value
/// and no increments.
class Path {
 public:
  /// Dense path from values alone; increments are formed by differencing.
  Path(TimeGrid grid, std::vector<double> values, std::uint64_t path_id = 0);
  /// Dense path with walker-produced increments (size n_steps).
  Path(TimeGrid grid, std::vector<double> values, std::vector<double> increments,
       std::uint64_t path_id);
  /// Thinned path: values at k = 0, stride, 2 stride, ... (stride must divide n_steps).
  [[nodiscard]] static Path thinned(TimeGrid grid, std::vector<double> values,
                                    std::uint64_t stride, std::uint64_t path_id);

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] std::uint64_t path_id() const noexcept { return path_id_; }
  [[nodiscard]] std::uint64_t stride() const noexcept { return stride_; }
  [[nodiscard]] bool dense() const noexcept { return stride_ == 1; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  /// Empty for thinned paths.
  [[nodiscard]] std::span<const double> increments() const noexcept { return increments_; }
  /// Time of stored value i.
  [[nodiscard]] double time_of(std::size_t i) const noexcept { return grid_.time(i * stride_); }

 private:
  Path(TimeGrid grid, std::uint64_t stride, std::uint64_t path_id)
      : grid_(grid), path_id_(path_id), stride_(stride) {}

  TimeGrid grid_;
  std::uint64_t path_id_ = 0;
  std::uint64_t stride_ = 1;
  std::vector<double> values_;
  std::vector<double> increments_;
};

/// Distribution of x(0). Draws come from the initial_condition noise domain, which is
/// disjoint from every eps stream.
class InitialCondition {
 public:
  enum class Kind { fixed, normal, uniform };

  [[nodiscard]] static InitialCondition fixed(double value);
  [[nodiscard]] static InitialCondition normal(double mean, double stddev);
  [[nodiscard]] static InitialCondition uniform(double lo, double hi);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double a() const noexcept { return a_; }
  [[nodiscard]] double b() const noexcept { return b_; }
  [[nodiscard]] double sample(std::uint64_t seed, std::uint64_t path_id) const noexcept;

 private:
  InitialCondition(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

[[nodiscard]] std::string to_string(InitialCondition::Kind kind);

/// Which grid points an ensemble keeps. Analyses that only need cross-sections
/// at a few times (marginals, final values) can run on huge ensembles this way;
/// per-step statistics over every step are computed by StepObservers instead.
struct StoragePlan {
  enum class Mode { dense, thinned, selected, none };

  Mode mode = Mode::dense;
  std::uint64_t stride = 1;
  std::vector<std::uint64_t> steps;
  /// For selected steps: also keep the increment leaving each selected step.
  bool keep_increments = true;

  [[nodiscard]] static StoragePlan dense() { return {}; }
  [[nodiscard]] static StoragePlan thinned(std::uint64_t stride) {
    return {Mode::thinned, stride, {}, false};
  }
  [[nodiscard]] static StoragePlan at_steps(std::vector<std::uint64_t> steps,
                                            bool keep_increments = true) {
    return {Mode::selected, 1, std::move(steps), keep_increments};
  }
  [[nodiscard]] static StoragePlan none() { return {Mode::none, 1, {}, false}; }
};

enum class NoiseKind { rademacher, gaussian };

[[nodiscard]] std::string to_string(NoiseKind kind);

/// The state of every path at one grid point, as handed to observers.
/// increments[i] = x_i(t_{k+1}) - x_i(t_k) as produced by the walker (empty at k = n_steps);
/// previous_increments is empty at k = 0.
struct CrossSection {
  std::uint64_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  std::span<const double> values;
  std::span<const double> increments;
  std::span<const double> previous_increments;
};

/// Receives every cross-section k = 0..n_steps of a simulation, in order, on one thread.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void observe(const CrossSection& section) = 0;
};

/// A set of i.i.d. paths on a common grid, stored time-major.
class Ensemble {
 public:
  Ensemble(TimeGrid grid, CoefficientField field, InitialCondition x0, std::uint64_t n_paths,
           std::uint64_t seed, NoiseKind noise, StoragePlan plan);

  /// Assemble an ensemble from dense paths on one grid (path ids must be distinct).
  [[nodiscard]] static Ensemble from_paths(const std::vector<Path>& paths, CoefficientField field,
                                           std::uint64_t seed = 0);

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const CoefficientField& field() const noexcept { return field_; }
  [[nodiscard]] const InitialCondition& initial_condition() const noexcept { return x0_; }
  [[nodiscard]] std::uint64_t n_paths() const noexcept { return n_paths_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] NoiseKind noise() const noexcept { return noise_; }
  [[nodiscard]] const StoragePlan& plan() const noexcept { return plan_; }
  [[nodiscard]] std::span<const std::uint64_t> path_ids() const noexcept { return path_ids_; }

  /// Every grid value and every increment is stored.
  [[nodiscard]] bool dense() const noexcept;
  [[nodiscard]] std::span<const std::uint64_t> recorded_steps() const noexcept { return steps_; }
  [[nodiscard]] bool has_step(std::uint64_t k) const noexcept;
  [[nodiscard]] bool has_increments(std::uint64_t k) const noexcept;

  /// x_i(t_k) for all paths; ResolutionError if step k was not recorded.
  [[nodiscard]] std::span<const double> values_at(std::uint64_t k) const;
  /// Increments leaving t_k; ResolutionError when not recorded.
  [[nodiscard]] std::span<const double> increments_at(std::uint64_t k) const;
  /// Cross-section view at a recorded step (previous increments filled when available).
  [[nodiscard]] CrossSection section(std::uint64_t k) const;

  /// Replay stored cross-sections into an observer; ResolutionError unless dense.
  void replay(StepObserver& observer) const;

  /// Path i. Dense ensembles yield dense paths, thinned ensembles thinned paths.
  [[nodiscard]] Path path(std::uint64_t i) const;

  /// Internal: storage slot for recorded step k (or npos).
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  [[nodiscard]] std::size_t slot(std::uint64_t k) const noexcept;
  [[nodiscard]] std::span<double> mutable_values(std::size_t slot) noexcept;
  [[nodiscard]] std::span<double> mutable_increments(std::size_t slot) noexcept;
  /// Replace the default ids 0..n_paths-1 (size must match, ids distinct).
  void assign_path_ids(std::vector<std::uint64_t> ids);

 private:
  TimeGrid grid_;
  CoefficientField field_;
  InitialCondition x0_;
  std::uint64_t n_paths_;
  std::uint64_t seed_;
  NoiseKind noise_;
  StoragePlan plan_;
  std::vector<std::uint64_t> path_ids_;
  std::vector<std::uint64_t> steps_;
  std::vector<bool> step_has_increment_;
  std::vector<double> values_;
  std::vector<double> increments_;
};

}  // namespace zitterwalk
