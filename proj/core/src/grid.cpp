#include "zitterwalk/grid.hpp"

#include <cmath>
#include <string>

#include "zitterwalk/error.hpp"

namespace zitterwalk {

TimeGrid::TimeGrid(std::uint64_t n_steps, double horizon)
    : n_steps_(n_steps), horizon_(horizon), dt_(0.0), sqrt_dt_(0.0) {
  if (n_steps == 0) {
    throw ConfigurationError("time grid: n_steps must be >= 1");
  }
  if (!std::isfinite(horizon) || horizon <= 0.0) {
    throw ConfigurationError("time grid: horizon must be finite and > 0, got " +
                             std::to_string(horizon));
  }
  dt_ = horizon / static_cast<double>(n_steps);
  sqrt_dt_ = std::sqrt(dt_);
}

std::uint64_t TimeGrid::nearest_step(double t) const {
  if (!std::isfinite(t) || t < 0.0 || t > horizon_) {
    throw ConfigurationError("time " + std::to_string(t) + " outside grid range [0, " +
                             std::to_string(horizon_) + "]");
  }
  const double scaled = t / dt_;
  auto k = static_cast<std::uint64_t>(std::floor(scaled));
  if (k >= n_steps_) return n_steps_;
  if (std::abs(time(k + 1) - t) < std::abs(t - time(k))) ++k;
  return k;
}

TimeGrid make_grid(std::uint64_t n_steps, double horizon) { return TimeGrid(n_steps, horizon); }

}  // namespace zitterwalk
