#pragma once

#include <cstdint>
#include <vector>

#include "zitterwalk/coefficients.hpp"
#include "zitterwalk/ensemble.hpp"
#include "zitterwalk/grid.hpp"
#include "zitterwalk/noise.hpp"

namespace zitterwalk {

/// b dt + sigma noise sqrt(dt), in exactly this evaluation order everywhere in the library.
[[nodiscard]] inline double walk_increment(double drift, double volatility, double noise,
                                           double dt, double sqrt_dt) noexcept {
  return drift * dt + volatility * noise * sqrt_dt;
}

/// One step of the infinitesimal walk:
///   x + b(t, x) dt + sigma(t, x) eps sqrt(dt),
/// with both coefficients evaluated once, at the left end point.
///
/// Throws NumericDomainError for non-finite coefficients and
/// DegenerateVolatilityError when sigma(t, x) <= 0.
[[nodiscard]] double step(double x, double t, const CoefficientField& field, int eps, double dt);

/// values[0] = x0, values[k+1] = step(values[k], t_k, field, eps_k, dt).
/// Errors carry the failing step index and the stream's path id.
[[nodiscard]] Path simulate_path(const CoefficientField& field, double x0, const TimeGrid& grid,
                                 const NoiseStream& stream);

struct SimulationOptions {
  StoragePlan storage = StoragePlan::dense();
  /// Called with every cross-section k = 0..n_steps, in order.
  std::vector<StepObserver*> observers;
  /// Worker threads; 0 means hardware concurrency. Results do not depend on it.
  unsigned threads = 0;
};

/// n_paths independent walks; path i is driven by NoiseStream(seed, i) and starts
/// from x0.sample(seed, i). The result is a pure function of the arguments.
[[nodiscard]] Ensemble simulate_ensemble(const CoefficientField& field,
                                         const InitialCondition& x0, const TimeGrid& grid,
                                         std::uint64_t n_paths, std::uint64_t seed,
                                         const SimulationOptions& options = {});

/// Shared engine: same scheme with either +/-1 or standard normal noise.
[[nodiscard]] Ensemble simulate_with_noise(NoiseKind noise, const CoefficientField& field,
                                           const InitialCondition& x0, const TimeGrid& grid,
                                           std::uint64_t n_paths, std::uint64_t seed,
                                           const SimulationOptions& options);

[[nodiscard]] unsigned resolve_thread_count(unsigned requested) noexcept;

}  // namespace zitterwalk
