#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/classifier.hpp"
#include "omni/types.hpp"

namespace omni {

/// 2d teachers use segment-average consensus, 3d teachers stack-k.
enum class TeacherKind { k2d, k3d };

struct FilterConfig {
  /// Kept iff max class probability >= threshold.
  double threshold = 0.5;
  TeacherKind teacher_kind = TeacherKind::k2d;
  /// Score untrimmed videos frame by frame; the video's confidence is its
  /// best frame. Without it untrimmed samples are rejected as an error.
  bool per_frame = false;

  void validate() const;
};

struct FilterReport {
  std::size_t pool_size = 0;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  double threshold = 0.0;
  std::vector<std::size_t> kept_histogram;

  double rejection_rate() const {
    return pool_size == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(pool_size);
  }
  nlohmann::json to_json() const;
};

struct FilterResult {
  Manifest auxiliary;
  FilterReport report;
};

/// Scores every pool sample with the teacher ensemble, drops those below the
/// threshold and pseudo-labels the rest with the argmax class. Output keeps
/// pool order.
FilterResult filter_pool(const Manifest& pool, std::span<const ClassifierModel> teachers,
                         const FilterConfig& config);

/// Per-class counts of label (or pseudo_label when unlabeled).
std::vector<std::size_t> class_distribution(const Manifest& manifest);

}  // namespace omni
