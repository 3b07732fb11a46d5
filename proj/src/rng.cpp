#include "ofbs/rng.h"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace ofbs {
namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed + kGolden) ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL));
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : key_(mix64(mix64(seed) ^ mix64(stream_id + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t CounterStream::bits(std::uint64_t counter) const noexcept {
  return mix64(key_ + (counter + 1) * kGolden);
}

double CounterStream::uniform(std::uint64_t counter) const noexcept {
  return (double(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::normal(std::uint64_t counter) const {
  return standard_normal_quantile(uniform(counter));
}

int CounterStream::sign(std::uint64_t counter) const noexcept {
  return (bits(counter) >> 63) ? 1 : -1;
}

double standard_normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

}  // namespace ofbs
