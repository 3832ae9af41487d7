#include "omni/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace omni {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string stream_id)
    : seed_(seed), stream_id_(std::move(stream_id)) {
  key_ = mix64(mix64(seed_ + kGolden) ^ hash_name(stream_id_));
}

std::uint64_t RngStream::at(std::uint64_t index) const {
  return mix64(key_ + (index + 1) * kGolden);
}

std::uint64_t RngStream::next_u64() { return at(counter_++); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection keeps the draw unbiased for any n.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return static_cast<std::size_t>(v % bound);
}

double RngStream::normal() {
  // Box-Muller; u1 is shifted away from zero so log() stays finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double stddev) { return mean + stddev * normal(); }

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("RngStream::gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
    double g = gamma(shape + 1.0);
    double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    return g * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::beta(double a, double b) {
  double x = gamma(a);
  double y = gamma(b);
  double s = x + y;
  // Both gammas underflow for tiny shapes; fall back to a fair coin, which is
  // the limiting distribution of Beta(a, a) as a -> 0.
  if (s == 0.0) return uniform() < a / (a + b) ? 1.0 : 0.0;
  return x / s;
}

RngStream RngStream::derive(std::string_view child) const {
  return RngStream(seed_, stream_id_ + "/" + std::string(child));
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng(seed, "epoch-shuffle/" + std::to_string(epoch));
  rng.shuffle(order);
  return order;
}

}  // namespace omni
