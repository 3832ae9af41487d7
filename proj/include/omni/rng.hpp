#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace omni {

/// Counter-based random stream. Draw `i` of stream (seed, stream_id) is a
/// pure function of those three values, so stages can be split across
/// threads without changing results. All distributions are implemented
/// here rather than through <random> so output is identical on every
/// platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string stream_id);

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return counter_; }

  /// Raw 64-bit value at an arbitrary draw index; does not advance.
  std::uint64_t at(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double stddev);
  double gamma(double shape);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Child stream keyed by this stream's seed and `stream_id/child`.
  RngStream derive(std::string_view child) const;

 private:
  std::uint64_t seed_;
  std::string stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// 64-bit FNV-1a, used to key streams by name.
std::uint64_t hash_name(std::string_view name);

/// Seeded permutation of [0, n) for one training epoch. Shared by the
/// teacher trainer and the joint scheduler so both visit the target set
/// in the same order.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace omni
