#include "gradtd/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gradtd {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ mix64(stream + kGamma))) {}

std::uint64_t RandomStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::exponential() { return -std::log1p(-uniform()); }

std::uint64_t RandomStream::geometric(double success_prob) {
  if (!(success_prob > 0.0 && success_prob <= 1.0)) {
    throw std::invalid_argument("geometric: success probability must lie in (0, 1]");
  }
  if (success_prob == 1.0) {
    (void)next_u64();
    return 0;
  }
  // P(n >= k) = (1-p)^k, so n = floor(log(1-u) / log(1-p)).
  const double u = uniform();
  return static_cast<std::uint64_t>(std::floor(std::log1p(-u) / std::log1p(-success_prob)));
}

double RandomStream::gaussian() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gradtd
