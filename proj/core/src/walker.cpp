#include "zitterwalk/walker.hpp"

#include <algorithm>
#include <barrier>
#include <bit>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <thread>

#include "zitterwalk/error.hpp"

namespace zitterwalk {

namespace {

[[noreturn]] void throw_bad_coefficient(const char* which, double value, EvaluationSite site) {
  throw NumericDomainError(std::string(which) + " evaluated to " + std::to_string(value), site);
}

inline void check_coefficients(double drift, double volatility, const EvaluationSite& site) {
  if (!std::isfinite(drift)) throw_bad_coefficient("drift", drift, site);
  if (!std::isfinite(volatility)) throw_bad_coefficient("volatility", volatility, site);
  if (!(volatility > 0.0)) throw DegenerateVolatilityError(volatility, site);
}

// Coefficient policies: closed forms are inlined into the path loop.
struct ConstantCoefficients {
  static constexpr bool kHistory = false;
  double b;
  double s;
  bool valid() const { return std::isfinite(b) && std::isfinite(s) && s > 0.0; }
  double drift(double, double) const { return b; }
  double volatility(double, double, int) const { return s; }
};

struct OuCoefficients {
  static constexpr bool kHistory = false;
  double omega;
  double s;
  bool valid() const { return std::isfinite(omega) && std::isfinite(s) && s > 0.0; }
  double drift(double, double x) const { return -omega * x; }
  double volatility(double, double, int) const { return s; }
};

struct GenericCoefficients {
  static constexpr bool kHistory = true;
  const CoefficientField* field;
  double drift(double t, double x) const { return field->drift(t, x); }
  double volatility(double t, double x, int prev) const { return field->volatility(t, x, prev); }
};

// First failure of a worker, keyed by (step, path) so the reported error does not
// depend on how paths were partitioned.
struct Failure {
  std::uint64_t step = 0;
  std::uint64_t path = 0;
  std::exception_ptr error;
};

bool earlier(const Failure& a, const Failure& b) {
  return a.step != b.step ? a.step < b.step : a.path < b.path;
}

struct EngineState {
  std::vector<double> x;
  std::vector<std::int8_t> previous_eps;
  // block words of the current 128-step block, word-major: [word][path]
  std::vector<std::uint32_t> rademacher_words;
  std::vector<std::array<double, 2>> gaussian_cache;
};

// Runs fn(worker) on `workers` threads (the caller is worker 0) once per dispatch.
class WorkerTeam {
 public:
  explicit WorkerTeam(unsigned workers) : workers_(workers), sync_(workers) {
    for (unsigned w = 1; w < workers_; ++w) {
      threads_.emplace_back([this, w] {
        for (;;) {
          sync_.arrive_and_wait();
          if (stop_) return;
          (*job_)(w);
          sync_.arrive_and_wait();
        }
      });
    }
  }

  ~WorkerTeam() {
    if (workers_ > 1) {
      stop_ = true;
      sync_.arrive_and_wait();
    }
  }

  WorkerTeam(const WorkerTeam&) = delete;
  WorkerTeam& operator=(const WorkerTeam&) = delete;

  void dispatch(const std::function<void(unsigned)>& job) {
    if (workers_ == 1) {
      job(0);
      return;
    }
    job_ = &job;
    sync_.arrive_and_wait();
    job(0);
    sync_.arrive_and_wait();
  }

 private:
  unsigned workers_;
  std::barrier<> sync_;
  const std::function<void(unsigned)>* job_ = nullptr;
  bool stop_ = false;
  std::vector<std::jthread> threads_;
};

// Recomputes step k of paths [begin, end) to find and describe the first failing path.
template <class Coefficients>
Failure locate_failure(const Coefficients& coeff, const TimeGrid& grid, std::uint64_t begin,
                       std::uint64_t end, std::uint64_t k, const double* x_row,
                       const std::int8_t* prev_row, const double* noise_row) {
  const double t = grid.time(k);
  for (std::uint64_t i = begin; i < end; ++i) {
    const double x = x_row[i];
    try {
      const double b = coeff.drift(t, x);
      const double s = coeff.volatility(t, x, prev_row != nullptr ? prev_row[i - begin] : 0);
      check_coefficients(b, s, {t, x, k, i});
      const double next = x + walk_increment(b, s, noise_row[i - begin], grid.dt(), grid.sqrt_dt());
      if (!std::isfinite(next)) {
        throw NumericDomainError("state left the finite range", EvaluationSite{t, x, k, i});
      }
    } catch (...) {
      return Failure{k, i, std::current_exception()};
    }
  }
  return Failure{k, begin, std::make_exception_ptr(Error("walker step failed"))};
}

inline bool finite_bits(double v) noexcept {
  return ((std::bit_cast<std::uint64_t>(v) >> 52) & 0x7ffU) != 0x7ffU;
}

// 1 when the exponent field is all ones (inf or NaN), else 0; integer-only so the
// path loop vectorises.
inline std::uint64_t nonfinite_flag(double v) noexcept {
  return (((std::bit_cast<std::uint64_t>(v) >> 52) & 0x7ffU) + 1) >> 11;
}

template <NoiseKind Noise, class Coefficients>
void advance(const Coefficients& coeff, const TimeGrid& grid, std::uint64_t seed,
             EngineState& state, std::uint64_t begin, std::uint64_t end, std::uint64_t k0,
             std::uint64_t k1, std::span<double> values_buf, std::span<double> incr_buf,
             std::uint64_t n_paths, std::optional<Failure>& failure) {
  const double dt = grid.dt();
  const double sqrt_dt = grid.sqrt_dt();
  const std::uint64_t width = end - begin;
  double* const x_state = state.x.data() + begin;
  std::int8_t* const prev_eps = state.previous_eps.data() + begin;
  std::vector<double> noise_row(width);
  std::vector<std::int8_t> prev_row(Coefficients::kHistory ? width : 0);
  if constexpr (!Coefficients::kHistory) {
    if (!coeff.valid()) {
      std::vector<double> x_row(state.x.begin(), state.x.end());
      std::vector<double> unit(width, 1.0);
      failure = locate_failure(coeff, grid, begin, end, k0, x_row.data(), nullptr, unit.data());
      return;
    }
  }
  for (std::uint64_t k = k0; k < k1; ++k) {
    const double t = grid.time(k);
    const std::size_t row = (k - k0) * n_paths + begin;
    double* const values = values_buf.data() + row;
    double* const incs = incr_buf.data() + row;
    double* const noise = noise_row.data();
    if constexpr (Noise == NoiseKind::rademacher) {
      const std::uint64_t bit = k % NoiseStream::kStepsPerBlock;
      if (bit == 0) {
        for (std::uint64_t i = begin; i < end; ++i) {
          const auto block = noise_detail::draw_block(seed, i, k / NoiseStream::kStepsPerBlock,
                                                      NoiseDomain::rademacher);
          for (std::size_t w = 0; w < 4; ++w) state.rademacher_words[w * n_paths + i] = block[w];
        }
      }
      const std::uint32_t* words = state.rademacher_words.data() + (bit >> 5) * n_paths + begin;
      const unsigned shift = bit & 31U;
      for (std::uint64_t i = 0; i < width; ++i) {
        noise[i] = static_cast<double>(static_cast<std::int32_t>((words[i] >> shift) & 1U) * 2 - 1);
      }
    } else {
      if (k % 2 == 0) {
        for (std::uint64_t i = begin; i < end; ++i) {
          state.gaussian_cache[i] = standard_normal_pair(seed, i, k / 2);
        }
      }
      for (std::uint64_t i = 0; i < width; ++i) noise[i] = state.gaussian_cache[begin + i][k % 2];
    }

    bool ok = true;
    if constexpr (Coefficients::kHistory) {
      std::copy(prev_eps, prev_eps + width, prev_row.begin());
      std::uint64_t i = 0;
      try {
        for (; i < width; ++i) {
          const double x = x_state[i];
          const double b = coeff.drift(t, x);
          const double s = coeff.volatility(t, x, prev_eps[i]);
          const double inc = walk_increment(b, s, noise[i], dt, sqrt_dt);
          const double next = x + inc;
          ok &= finite_bits(b) & (s > 0.0) & finite_bits(s) & finite_bits(next);
          values[i] = x;
          incs[i] = inc;
          x_state[i] = next;
          prev_eps[i] = noise[i] >= 0.0 ? 1 : -1;
        }
      } catch (...) {
        failure = Failure{k, begin + i, std::current_exception()};
        return;
      }
    } else {
      // closed-form fields: the coefficient constants were validated before the run, so
      // only the new state can leave the finite range
      std::uint64_t bad = 0;
      for (std::uint64_t i = 0; i < width; ++i) {
        const double x = x_state[i];
        const double inc = walk_increment(coeff.drift(t, x), coeff.volatility(t, x, 0), noise[i],
                                          dt, sqrt_dt);
        const double next = x + inc;
        values[i] = x;
        incs[i] = inc;
        x_state[i] = next;
        bad |= nonfinite_flag(next);
      }
      ok = bad == 0;
    }
    if (!ok) {
      failure = locate_failure(coeff, grid, begin, end, k, values - begin,
                               prev_row.empty() ? nullptr : prev_row.data(),
                               noise);
      return;
    }
  }
}

template <NoiseKind Noise>
void run_engine(const CoefficientField& field, const TimeGrid& grid, std::uint64_t seed,
                EngineState& state, std::uint64_t begin, std::uint64_t end, std::uint64_t k0,
                std::uint64_t k1, std::span<double> values_buf, std::span<double> incr_buf,
                std::uint64_t n_paths, std::optional<Failure>& failure) {
  switch (field.kind()) {
    case FieldKind::constant:
      advance<Noise>(ConstantCoefficients{field.constant_drift(), field.constant_volatility()},
                     grid, seed, state, begin, end, k0, k1, values_buf, incr_buf, n_paths,
                     failure);
      return;
    case FieldKind::ou_nelson:
      advance<Noise>(OuCoefficients{field.omega(), field.constant_volatility()}, grid, seed,
                     state, begin, end, k0, k1, values_buf, incr_buf, n_paths, failure);
      return;
    case FieldKind::user:
      advance<Noise>(GenericCoefficients{&field}, grid, seed, state, begin, end, k0, k1,
                     values_buf, incr_buf, n_paths, failure);
      return;
  }
}

}  // namespace

unsigned resolve_thread_count(unsigned requested) noexcept {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

double step(double x, double t, const CoefficientField& field, int eps, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("step: dt must be > 0");
  if (eps != 1 && eps != -1) throw ConfigurationError("step: eps must be +1 or -1");
  const double b = field.drift(t, x);
  const double s = field.volatility(t, x);
  check_coefficients(b, s, {t, x, std::nullopt, std::nullopt});
  return x + walk_increment(b, s, eps, dt, std::sqrt(dt));
}

Path simulate_path(const CoefficientField& field, double x0, const TimeGrid& grid,
                   const NoiseStream& stream) {
  if (!std::isfinite(x0)) throw ConfigurationError("x0 must be finite");
  const std::uint64_t n = grid.n_steps();
  std::vector<double> values(n + 1);
  std::vector<double> increments(n);
  values[0] = x0;
  int previous_eps = 0;
  Philox4x32::Counter block{};
  for (std::uint64_t k = 0; k < n; ++k) {
    if (k % NoiseStream::kStepsPerBlock == 0) block = stream.block(k / NoiseStream::kStepsPerBlock);
    const int eps = NoiseStream::bit_to_sign(block, k % NoiseStream::kStepsPerBlock);
    const double t = grid.time(k);
    const double x = values[k];
    const EvaluationSite site{t, x, k, stream.path_id()};
    const double b = field.drift(t, x);
    const double s = field.volatility(t, x, previous_eps);
    check_coefficients(b, s, site);
    increments[k] = walk_increment(b, s, eps, grid.dt(), grid.sqrt_dt());
    values[k + 1] = x + increments[k];
    if (!std::isfinite(values[k + 1])) {
      throw NumericDomainError("state left the finite range", site);
    }
    previous_eps = eps;
  }
  return Path(grid, std::move(values), std::move(increments), stream.path_id());
}

Ensemble simulate_ensemble(const CoefficientField& field, const InitialCondition& x0,
                           const TimeGrid& grid, std::uint64_t n_paths, std::uint64_t seed,
                           const SimulationOptions& options) {
  return simulate_with_noise(NoiseKind::rademacher, field, x0, grid, n_paths, seed, options);
}

Ensemble simulate_with_noise(NoiseKind noise, const CoefficientField& field,
                             const InitialCondition& x0, const TimeGrid& grid,
                             std::uint64_t n_paths, std::uint64_t seed,
                             const SimulationOptions& options) {
  Ensemble ensemble(grid, field, x0, n_paths, seed, noise, options.storage);
  const std::uint64_t n = grid.n_steps();

  EngineState state;
  state.x.resize(n_paths);
  state.previous_eps.assign(n_paths, 0);
  if (noise == NoiseKind::rademacher) {
    state.rademacher_words.resize(4 * n_paths);
  } else {
    state.gaussian_cache.resize(n_paths);
  }
  for (std::uint64_t i = 0; i < n_paths; ++i) state.x[i] = x0.sample(seed, i);

  // Steps are simulated in segments; observers see the buffered cross-sections
  // afterwards, so thread synchronisation happens once per segment.
  const std::uint64_t segment =
      std::clamp<std::uint64_t>((std::uint64_t{1} << 16) / n_paths, 1, 256);
  std::vector<double> values_buf(segment * n_paths);
  std::vector<double> incr_buf(segment * n_paths);
  std::vector<double> carried_increments;  // increments of the step before the segment

  const unsigned workers = static_cast<unsigned>(
      std::min<std::uint64_t>(resolve_thread_count(options.threads), std::max<std::uint64_t>(1, n_paths / 256)));
  WorkerTeam team(workers);
  std::vector<std::optional<Failure>> failures(workers);

  auto emit = [&](std::uint64_t k, std::span<const double> values, std::span<const double> incs,
                  std::span<const double> prev) {
    const std::size_t s = ensemble.slot(k);
    if (s != Ensemble::npos) {
      std::copy(values.begin(), values.end(), ensemble.mutable_values(s).begin());
      if (ensemble.has_increments(k)) {
        std::copy(incs.begin(), incs.end(), ensemble.mutable_increments(s).begin());
      }
    }
    if (options.observers.empty()) return;
    const CrossSection cs{k, grid.time(k), grid.dt(), values, incs, prev};
    for (StepObserver* obs : options.observers) obs->observe(cs);
  };

  for (std::uint64_t k0 = 0; k0 < n; k0 += segment) {
    const std::uint64_t k1 = std::min(n, k0 + segment);
    const std::function<void(unsigned)> job = [&](unsigned w) {
      const std::uint64_t begin = n_paths * w / workers;
      const std::uint64_t end = n_paths * (w + 1) / workers;
      failures[w].reset();
      if (noise == NoiseKind::rademacher) {
        run_engine<NoiseKind::rademacher>(field, grid, seed, state, begin, end, k0, k1,
                                          values_buf, incr_buf, n_paths, failures[w]);
      } else {
        run_engine<NoiseKind::gaussian>(field, grid, seed, state, begin, end, k0, k1,
                                        values_buf, incr_buf, n_paths, failures[w]);
      }
    };
    team.dispatch(job);

    std::optional<Failure> first;
    for (const auto& f : failures) {
      if (f && (!first || earlier(*f, *first))) first = f;
    }
    if (first) std::rethrow_exception(first->error);

    for (std::uint64_t k = k0; k < k1; ++k) {
      const std::size_t row = (k - k0) * n_paths;
      const std::span<const double> values(values_buf.data() + row, n_paths);
      const std::span<const double> incs(incr_buf.data() + row, n_paths);
      std::span<const double> prev;
      if (k > k0) {
        prev = std::span<const double>(incr_buf.data() + row - n_paths, n_paths);
      } else if (k > 0) {
        prev = carried_increments;
      }
      emit(k, values, incs, prev);
    }
    const std::size_t last = (k1 - 1 - k0) * n_paths;
    carried_increments.assign(incr_buf.begin() + static_cast<std::ptrdiff_t>(last),
                              incr_buf.begin() + static_cast<std::ptrdiff_t>(last + n_paths));
  }
  emit(n, state.x, {}, carried_increments);
  return ensemble;
}

}  // namespace zitterwalk
