#include "zitterwalk/noise.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "zitterwalk/error.hpp"
#include "zitterwalk/summation.hpp"

namespace zitterwalk {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53U;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57U;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9U;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
inline std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

// Marsaglia & Tsang ziggurat, 128 layers.
struct ZigguratTables {
  std::array<std::uint32_t, 128> kn{};
  std::array<double, 128> wn{};
  std::array<double, 128> fn{};

  ZigguratTables() {
    constexpr double m1 = 2147483648.0;
    constexpr double vn = 9.91256303526217e-3;
    double dn = 3.442619855899;
    double tn = dn;
    const double q = vn / std::exp(-0.5 * dn * dn);
    kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
    kn[1] = 0;
    wn[0] = q / m1;
    wn[127] = dn / m1;
    fn[0] = 1.0;
    fn[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m1;
    }
  }
};

const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

constexpr double kZigguratTail = 3.442619855899;

// Supplies extra 32-bit words for rejected ziggurat draws of one (path, step).
class RetryWords {
 public:
  RetryWords(std::uint64_t seed, std::uint64_t path_id, std::uint64_t step)
      : seed_(seed), path_id_(path_id), step_(step) {}

  std::uint32_t next() {
    if (used_ == 4) {
      // attempt number lives above the 20 low bits of the step's high word
      const std::uint64_t index = (step_ & 0x000FFFFFFFFFFFFFULL) | (attempt_ << 52);
      block_ = noise_detail::draw_block(seed_, path_id_, index, NoiseDomain::gaussian_retry);
      ++attempt_;
      used_ = 0;
    }
    return block_[used_++];
  }

 private:
  std::uint64_t seed_;
  std::uint64_t path_id_;
  std::uint64_t step_;
  std::uint64_t attempt_ = 0;
  Philox4x32::Counter block_{};
  int used_ = 4;
};

double ziggurat_normal(std::uint32_t value_word, std::uint32_t layer_word, std::uint64_t seed,
                       std::uint64_t path_id, std::uint64_t step) {
  const auto& z = ziggurat();
  auto hz = static_cast<std::int32_t>(value_word);
  std::uint32_t iz = layer_word & 127U;
  if (static_cast<std::uint64_t>(std::llabs(hz)) < z.kn[iz]) return hz * z.wn[iz];

  RetryWords retry(seed, path_id, step);
  for (;;) {
    const double x = hz * z.wn[iz];
    if (iz == 0) {
      double tail = 0.0;
      double y = 0.0;
      do {
        tail = -std::log(noise_detail::open_unit(retry.next())) / kZigguratTail;
        y = -std::log(noise_detail::open_unit(retry.next()));
      } while (y + y < tail * tail);
      return hz > 0 ? kZigguratTail + tail : -kZigguratTail - tail;
    }
    const double u = noise_detail::open_unit(retry.next());
    if (z.fn[iz] + u * (z.fn[iz - 1] - z.fn[iz]) < std::exp(-0.5 * x * x)) return x;
    hz = static_cast<std::int32_t>(retry.next());
    iz = retry.next() & 127U;
    if (static_cast<std::uint64_t>(std::llabs(hz)) < z.kn[iz]) return hz * z.wn[iz];
  }
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

namespace noise_detail {

Philox4x32::Counter draw_block(std::uint64_t seed, std::uint64_t path_id, std::uint64_t index,
                               NoiseDomain domain) noexcept {
  const std::uint32_t word1 =
      (hi32(index) & 0x0FFFFFFFU) | (static_cast<std::uint32_t>(domain) << 28);
  return Philox4x32::generate({lo32(index), word1, lo32(path_id), hi32(path_id)},
                              {lo32(seed), hi32(seed)});
}

}  // namespace noise_detail

std::array<double, 2> standard_normal_pair(std::uint64_t seed, std::uint64_t path_id,
                                           std::uint64_t pair_index) noexcept {
  const auto w = noise_detail::draw_block(seed, path_id, pair_index, NoiseDomain::gaussian);
  return {ziggurat_normal(w[0], w[1], seed, path_id, 2 * pair_index),
          ziggurat_normal(w[2], w[3], seed, path_id, 2 * pair_index + 1)};
}

double standard_normal(std::uint64_t seed, std::uint64_t path_id, std::uint64_t k) noexcept {
  const auto w = noise_detail::draw_block(seed, path_id, k / 2, NoiseDomain::gaussian);
  return (k % 2 == 0) ? ziggurat_normal(w[0], w[1], seed, path_id, k)
                      : ziggurat_normal(w[2], w[3], seed, path_id, k);
}

double NoiseStream::gaussian(std::uint64_t k) const noexcept {
  return standard_normal(seed_, path_id_, k);
}

bool NoiseBiasReport::fair(double sigmas, double p_floor) const noexcept {
  const double bound = sigmas / std::sqrt(static_cast<double>(n));
  if (std::abs(mean) > bound) return false;
  if (!(chi_square_p_value > p_floor && chi_square_p_value < 1.0 - p_floor)) return false;
  for (double r : autocorrelation) {
    if (!(std::abs(r) <= bound)) return false;
  }
  return true;
}

NoiseBiasReport noise_bias_report(std::span<const std::int8_t> draws) {
  const std::size_t n = draws.size();
  if (n < 100) {
    throw InsufficientDataError("noise bias report needs at least 100 draws, got " +
                                std::to_string(n));
  }
  NoiseBiasReport report;
  report.n = n;

  std::size_t plus = 0;
  for (std::int8_t e : draws) plus += (e > 0) ? 1 : 0;
  const auto nd = static_cast<double>(n);
  const auto plus_d = static_cast<double>(plus);
  report.p_plus = plus_d / nd;
  report.mean = (2.0 * plus_d - nd) / nd;

  const double expected = nd / 2.0;
  const double minus_d = nd - plus_d;
  report.chi_square = ((plus_d - expected) * (plus_d - expected) +
                       (minus_d - expected) * (minus_d - expected)) /
                      expected;
  // Upper tail of chi-square with one degree of freedom.
  report.chi_square_p_value = std::erfc(std::sqrt(report.chi_square / 2.0));

  const double m = report.mean;
  NeumaierSum variance;
  for (std::int8_t e : draws) variance += (e - m) * (e - m);
  for (std::size_t lag = 1; lag <= NoiseBiasReport::kMaxLag; ++lag) {
    NeumaierSum cov;
    for (std::size_t i = 0; i + lag < n; ++i) cov += (draws[i] - m) * (draws[i + lag] - m);
    report.autocorrelation[lag - 1] = variance.value() > 0.0
                                          ? cov.value() / variance.value()
                                          : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

NoiseBiasReport noise_bias_report(const NoiseStream& stream, std::size_t n) {
  if (n < 100) {
    throw InsufficientDataError("noise bias report needs at least 100 draws, got " +
                                std::to_string(n));
  }
  std::vector<std::int8_t> draws(n);
  for (std::size_t b = 0; b * NoiseStream::kStepsPerBlock < n; ++b) {
    const auto block = stream.block(b);
    const std::size_t base = b * NoiseStream::kStepsPerBlock;
    for (std::size_t j = 0; j < NoiseStream::kStepsPerBlock && base + j < n; ++j) {
      draws[base + j] = static_cast<std::int8_t>(NoiseStream::bit_to_sign(block, j));
    }
  }
  return noise_bias_report(draws);
}

double sign_correlation(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InsufficientDataError("sign_correlation needs two equal-length sequences");
  }
  const auto n = static_cast<double>(a.size());
  NeumaierSum sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa.value() / n;
  const double mb = sb.value() / n;
  NeumaierSum cov, va, vb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va.value() <= 0.0 || vb.value() <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov.value() / std::sqrt(va.value() * vb.value());
}

}  // namespace zitterwalk
