#include "esrgan/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace esrgan {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngState::next_u64() {
  ++counter;
  return mix64(seed + counter * kGolden);
}

double RngState::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngState::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngState::below: bound must be positive");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double RngState::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngState RngState::fork(std::uint64_t tag) const {
  return RngState(mix64(seed ^ mix64(tag + kGolden)) + kGolden, 0);
}

Tensor normal_sample(RngState& rng, Shape shape) {
  std::vector<double> out(shape.numel());
  std::size_t i = 0;
  for (; i + 1 < out.size(); i += 2) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    out[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  if (i < out.size()) out[i] = rng.normal();
  return Tensor::from_data(shape, std::move(out));
}

}  // namespace esrgan
