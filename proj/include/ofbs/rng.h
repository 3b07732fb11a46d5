#pragma once

#include <cstdint>

namespace ofbs {

/// SplitMix64 output finaliser; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Independent child seed for (seed, index), e.g. one per replicate.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Counter-based random stream: the value at position `counter` is a pure function of
/// (key, counter), so any cell of any replicate can be drawn independently and in any order.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t bits(std::uint64_t counter) const noexcept;
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform(std::uint64_t counter) const noexcept;
  /// Standard normal by inverse-CDF transform of uniform(counter).
  double normal(std::uint64_t counter) const;
  /// Uniform on {-1, +1}.
  int sign(std::uint64_t counter) const noexcept;

  CounterStream substream(std::uint64_t id) const noexcept { return CounterStream(key_, id); }

 private:
  std::uint64_t key_;
};

/// Inverse of the standard normal CDF for p in (0, 1).
double standard_normal_quantile(double p);

}  // namespace ofbs
