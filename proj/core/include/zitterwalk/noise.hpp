#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace zitterwalk {

/// Philox4x32-10 counter-based bijection (Salmon et al., Random123).
/// Every random quantity in the library is a pure function of
/// (seed, path_id, step) routed through this block function.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  [[nodiscard]] static Counter generate(Counter counter, Key key) noexcept;
};

/// Disjoint counter spaces. The domain occupies the top four bits of counter word 1,
/// so streams of different kinds never share a Philox block for any seed.
enum class NoiseDomain : std::uint32_t {
  rademacher = 0,
  gaussian = 1,
  gaussian_retry = 2,
  initial_condition = 3,
};

namespace noise_detail {

[[nodiscard]] Philox4x32::Counter draw_block(std::uint64_t seed, std::uint64_t path_id,
                                             std::uint64_t index, NoiseDomain domain) noexcept;

/// 32-bit word -> uniform on the open interval (0, 1).
[[nodiscard]] inline double open_unit(std::uint32_t w) noexcept {
  return (static_cast<double>(w) + 0.5) * 0x1.0p-32;
}

/// Two 32-bit words -> uniform on (0, 1) with 52-bit resolution (bits + 1/2 stays exact).
[[nodiscard]] inline double open_unit52(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

}  // namespace noise_detail

/// The +/-1 process driving one path: a pure function of (seed, path_id, step).
///
/// Steps are packed 128 to a Philox block; step k reads bit (k mod 128) of block k / 128.
class NoiseStream {
 public:
  static constexpr std::uint64_t kStepsPerBlock = 128;

  constexpr NoiseStream(std::uint64_t seed, std::uint64_t path_id) noexcept
      : seed_(seed), path_id_(path_id) {}

  [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] constexpr std::uint64_t path_id() const noexcept { return path_id_; }

  /// epsilon(t_k), exactly +1 or -1.
  [[nodiscard]] int rademacher(std::uint64_t k) const noexcept {
    return bit_to_sign(block(k / kStepsPerBlock), k % kStepsPerBlock);
  }

  /// Standard normal increment for step k (ziggurat on the gaussian domain).
  [[nodiscard]] double gaussian(std::uint64_t k) const noexcept;

  [[nodiscard]] Philox4x32::Counter block(std::uint64_t block_index) const noexcept {
    return noise_detail::draw_block(seed_, path_id_, block_index, NoiseDomain::rademacher);
  }

  [[nodiscard]] static int bit_to_sign(const Philox4x32::Counter& block,
                                       std::uint64_t bit) noexcept {
    return ((block[bit >> 5] >> (bit & 31U)) & 1U) != 0 ? 1 : -1;
  }

  friend bool operator==(const NoiseStream&, const NoiseStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t path_id_;
};

[[nodiscard]] inline int rademacher(const NoiseStream& stream, std::uint64_t k) noexcept {
  return stream.rademacher(k);
}

/// Standard normal draw for (seed, path_id, k). Steps are paired per Philox block.
[[nodiscard]] double standard_normal(std::uint64_t seed, std::uint64_t path_id,
                                     std::uint64_t k) noexcept;

/// Both normals of pair block p, i.e. steps 2p and 2p + 1.
[[nodiscard]] std::array<double, 2> standard_normal_pair(std::uint64_t seed,
                                                         std::uint64_t path_id,
                                                         std::uint64_t pair_index) noexcept;

/// Frequency and serial-correlation diagnostics for a +/-1 sequence.
struct NoiseBiasReport {
  static constexpr std::size_t kMaxLag = 10;

  std::size_t n = 0;
  double mean = 0.0;
  double p_plus = 0.0;
  /// Pearson statistic of (#+1, #-1) against (n/2, n/2); one degree of freedom.
  double chi_square = 0.0;
  double chi_square_p_value = 1.0;
  /// Sample autocorrelations at lags 1..kMaxLag (NaN when the sequence is constant).
  std::array<double, kMaxLag> autocorrelation{};

  /// |mean| <= sigmas/sqrt(n), every |autocorrelation| <= sigmas/sqrt(n), and
  /// the chi-square p-value inside (p_floor, 1 - p_floor).
  [[nodiscard]] bool fair(double sigmas = 4.0, double p_floor = 1e-3) const noexcept;
};

/// Rejects n < 100 with InsufficientDataError.
[[nodiscard]] NoiseBiasReport noise_bias_report(const NoiseStream& stream, std::size_t n);
[[nodiscard]] NoiseBiasReport noise_bias_report(std::span<const std::int8_t> draws);

/// Pearson correlation of two equal-length +/-1 sequences.
[[nodiscard]] double sign_correlation(std::span<const std::int8_t> a,
                                      std::span<const std::int8_t> b);

}  // namespace zitterwalk
