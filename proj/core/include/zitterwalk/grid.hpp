#pragma once

#include <cstddef>
#include <cstdint>

namespace zitterwalk {

/// The discretised time axis {k * dt : 0 <= k <= n_steps}.
///
/// dt is stored once and grid points are formed as k * dt, so the axis does
/// not accumulate rounding error along its length. The final point is pinned
/// to the requested horizon.
class TimeGrid {
 public:
  /// Throws ConfigurationError for n_steps == 0 or a non-finite / non-positive horizon.
  TimeGrid(std::uint64_t n_steps, double horizon);

  [[nodiscard]] std::uint64_t n_steps() const noexcept { return n_steps_; }
  [[nodiscard]] std::uint64_t n_points() const noexcept { return n_steps_ + 1; }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] double sqrt_dt() const noexcept { return sqrt_dt_; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }

  /// t_k; k must be <= n_steps.
  [[nodiscard]] double time(std::uint64_t k) const noexcept {
    return k == n_steps_ ? horizon_ : static_cast<double>(k) * dt_;
  }

  /// Index of the grid point closest to t (ties resolve to the lower index).
  /// Throws ConfigurationError when t lies outside [0, horizon].
  [[nodiscard]] std::uint64_t nearest_step(double t) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::uint64_t n_steps_;
  double horizon_;
  double dt_;
  double sqrt_dt_;
};

[[nodiscard]] TimeGrid make_grid(std::uint64_t n_steps, double horizon);

}  // namespace zitterwalk
