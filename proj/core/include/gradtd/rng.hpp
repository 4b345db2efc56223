#pragma once

#include <cstdint>

namespace gradtd {

/// Counter-based uniform stream keyed by (seed, stream id).
///
/// The k-th draw is a pure function of (seed, stream, k): a SplitMix64
/// finalizer applied to key + (k+1)·γ. Nothing depends on the platform's
/// <random> distributions, so draws are bit-reproducible everywhere.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  /// Raw 64-bit output; advances the counter.
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  /// Exponential with unit mean, inverse CDF.
  double exponential();

  /// Number of failures before the first success, P(n) = (1-p)^n p.
  std::uint64_t geometric(double success_prob);

  /// Standard normal via Box-Muller (consumes two uniforms per draw).
  double gaussian();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t z);

}  // namespace gradtd
