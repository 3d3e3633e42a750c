#pragma once

#include <cstdint>

#include "esrgan/tensor.hpp"

namespace esrgan {

/// Counter-based random stream (SplitMix64 over seed + counter).
///
/// The full state is two integers, so it can be checkpointed and restored
/// exactly; identical (seed, counter) pairs produce identical streams on every
/// platform.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  explicit RngState(std::uint64_t s = 0, std::uint64_t c = 0) : seed(s), counter(c) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();

  /// Independent child stream keyed by `tag`; does not advance this stream.
  RngState fork(std::uint64_t tag) const;

  bool operator==(const RngState&) const = default;
};

/// I.i.d. N(0, 1) samples; never tracks gradients.
Tensor normal_sample(RngState& rng, Shape shape);

}  // namespace esrgan
