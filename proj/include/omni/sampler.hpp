#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omni/rng.hpp"
#include "omni/types.hpp"

namespace omni {

enum class ResampleKind { kNone, kClipped, kPower };

std::string_view to_string(ResampleKind kind);
ResampleKind parse_resample_kind(std::string_view text);

/// Class-level sampling distribution over the auxiliary set: proportional
/// to N (none), min(N, n_c) (clipped) or N^p (power).
struct ResampleStrategy {
  ResampleKind kind = ResampleKind::kPower;
  double n_c = 5000.0;
  double p = 0.2;

  static ResampleStrategy none() { return {ResampleKind::kNone, 5000.0, 1.0}; }
  static ResampleStrategy clipped(double n_c) { return {ResampleKind::kClipped, n_c, 1.0}; }
  static ResampleStrategy power(double p) { return {ResampleKind::kPower, 5000.0, p}; }

  void validate() const;
};

std::vector<double> class_weights(std::span<const std::size_t> counts, const ResampleStrategy& strategy);

struct AuxiliaryDraw {
  std::size_t cls = 0;
  std::size_t rank = 0;   // position among the class's members, in manifest order
  std::size_t index = 0;  // manifest index
};

/// Two-stage draw: class from class_weights, then a uniform member of that
/// class. The (class, rank) stream depends only on the seed and the class
/// counts, not on how samples are ordered in the manifest.
class AuxiliarySampler {
 public:
  AuxiliarySampler(const Manifest& auxiliary, const ResampleStrategy& strategy);

  bool empty() const { return members_total_ == 0; }
  const std::vector<double>& weights() const { return weights_; }
  AuxiliaryDraw draw(RngStream& rng) const;

 private:
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::size_t members_total_ = 0;
};

std::vector<std::size_t> draw_auxiliary(const Manifest& auxiliary, const ResampleStrategy& strategy,
                                        std::size_t n, RngStream& rng);

/// |B_T| : |B_A|.
struct BatchRatio {
  int target = 2;
  int auxiliary = 1;

  static BatchRatio parse(std::string_view text);  // "2:1"
  std::string to_string() const;
};

struct SamplerConfig {
  BatchRatio ratio;
  std::size_t batch_target = 32;
  ResampleStrategy resample;

  void validate() const;
  /// Auxiliary draws paired with a target batch of `target_size`.
  std::size_t auxiliary_size(std::size_t target_size, bool auxiliary_available) const;
};

struct BatchPlan {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  // global, counted from 0
  std::vector<std::size_t> target;
  std::vector<std::size_t> auxiliary;
};

/// One epoch is one seeded pass over the target set in batches of
/// batch_target; each batch is paired with auxiliary draws at the
/// configured ratio.
class BatchScheduler {
 public:
  BatchScheduler(const Manifest& target, const Manifest& auxiliary, SamplerConfig config,
                 std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  std::vector<BatchPlan> epoch_plans(std::size_t epoch) const;
  /// Same plans, with auxiliary draws reported as (class, rank) pairs.
  std::vector<std::vector<AuxiliaryDraw>> epoch_draws(std::size_t epoch) const;

 private:
  std::size_t target_size_;
  AuxiliarySampler aux_;
  SamplerConfig config_;
  std::uint64_t seed_;
};

}  // namespace omni
