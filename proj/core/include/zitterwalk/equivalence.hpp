#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zitterwalk/coefficients.hpp"
#include "zitterwalk/ensemble.hpp"
#include "zitterwalk/walker.hpp"

namespace zitterwalk {

/// The diffusion dx = b dt + sigma dW simulated with the walker's own left-point scheme,
/// eps replaced by standard normal draws. Same determinism contract as simulate_ensemble.
[[nodiscard]] Ensemble gaussian_reference(const CoefficientField& field,
                                          const InitialCondition& x0, const TimeGrid& grid,
                                          std::uint64_t n_paths, std::uint64_t seed,
                                          const SimulationOptions& options = {});

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
[[nodiscard]] double ks_distance(std::span<const double> a, std::span<const double> b);

/// Empirical Wasserstein-1 distance. For equal sizes this is the mean absolute
/// difference of the sorted samples; otherwise the exact integral of |F_a - F_b|.
[[nodiscard]] double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Asymptotic two-sample KS critical value sqrt(-ln(alpha/2)/2) sqrt((n+m)/(n m)).
[[nodiscard]] double ks_critical_value(std::uint64_t n, std::uint64_t m, double alpha);

/// sup_x |P(eps_1 + ... + eps_m <= x) - Phi(x / sqrt(m))|: the exact KS distance between
/// the law of a free +/-1 walk after m steps and its Gaussian limit.
[[nodiscard]] double rademacher_lattice_ks(std::uint64_t m);

struct ComparisonPoint {
  double requested_time = 0.0;
  std::uint64_t step = 0;
  double time = 0.0;
  double ks = 0.0;
  double wasserstein = 0.0;
  std::uint64_t n_walk = 0;
  std::uint64_t n_reference = 0;
  double ks_threshold = 0.0;
  std::optional<double> wasserstein_threshold;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<ComparisonPoint> points;
  [[nodiscard]] bool pass() const noexcept;
};

struct EquivalenceThresholds {
  /// One KS threshold per requested time, or a single value used for all.
  std::vector<double> ks;
  std::optional<double> wasserstein;
};

/// Marginal comparison at the grid points nearest each requested time.
/// ConfigurationError for mismatched horizons or times outside [0, horizon];
/// ResolutionError when a needed step was not recorded.
[[nodiscard]] ComparisonReport equivalence_report(const Ensemble& walk, const Ensemble& reference,
                                                  std::span<const double> times,
                                                  const EquivalenceThresholds& thresholds);
[[nodiscard]] ComparisonReport equivalence_report(const Ensemble& walk, const Ensemble& reference,
                                                  std::span<const double> times,
                                                  double ks_threshold);

struct KsCalibration {
  /// Per requested time: the quantile of KS over the seed pairs.
  std::vector<double> thresholds;
  std::vector<std::vector<double>> samples;
};

/// Null distribution of KS between two independent Gaussian-reference ensembles,
/// repeated over n_pairs seed pairs; returns the requested quantile per time.
[[nodiscard]] KsCalibration calibrate_ks_threshold(const CoefficientField& field,
                                                   const InitialCondition& x0,
                                                   const TimeGrid& grid, std::uint64_t n_paths,
                                                   std::span<const double> times,
                                                   std::uint64_t n_pairs, double quantile,
                                                   std::uint64_t base_seed,
                                                   unsigned threads = 0);

// ---------------------------------------------------------------------------
// Stability of coupled walks: two fields driven by the same eps.
// ---------------------------------------------------------------------------

struct StabilityReport {
  /// max_k |x1(t_k) - x2(t_k)|, with the gap propagated through its own recursion.
  double sup_gap = 0.0;
  /// max_k |x1(t_k) - x2(t_k)| from the separately stored states (subject to cancellation).
  double sup_gap_naive = 0.0;
  std::uint64_t sup_gap_step = 0;
  /// Largest |b1 - b2| and |sigma1 - sigma2| evaluated along the second walk.
  double drift_gap = 0.0;
  double volatility_gap = 0.0;
  double initial_gap = 0.0;
  double lipschitz_bound = 0.0;
  /// Largest finite-difference slope of field1 over the visited region.
  double observed_lipschitz = 0.0;
  bool lipschitz_consistent = true;
  /// Discrete Gronwall bound at the final step.
  double gronwall_bound = 0.0;
  std::uint64_t bound_violations = 0;
  bool pass = false;
  /// Gap series and bound series (n_steps + 1 each).
  std::vector<double> gaps;
  std::vector<double> bounds;
};

/// Both walks share NoiseStream(seed, 0). With field1 L-Lipschitz in x,
///   bound_{k+1} = bound_k (1 + L dt + L sqrt(dt)) + delta_b dt + delta_sigma sqrt(dt),
/// bound_0 = |x01 - x02|; pass iff gap_k <= bound_k at every step.
[[nodiscard]] StabilityReport stability_check(const CoefficientField& field1,
                                              const CoefficientField& field2, double x01,
                                              double x02, const TimeGrid& grid,
                                              std::uint64_t seed, double lipschitz_bound);

}  // namespace zitterwalk
