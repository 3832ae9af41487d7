#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "omni/types.hpp"

namespace omni {

/// How a multi-frame sample collapses into one vector. Segment-average is the
/// sparse-segment (2D) analogue, stack-k the dense-clip (3D) analogue.
enum class Consensus { kSegmentAverage, kStackK };

std::string_view to_string(Consensus c);
Consensus parse_consensus(std::string_view text);

struct FeaturizerConfig {
  int grid = 8;
  Consensus consensus = Consensus::kSegmentAverage;
  int stack_k = 3;

  /// grid^2 downsampled cells plus 4 pooled statistics per frame.
  std::size_t frame_dims() const { return static_cast<std::size_t>(grid) * grid + 4; }
  std::size_t dims() const {
    return frame_dims() * (consensus == Consensus::kStackK ? static_cast<std::size_t>(stack_k) : 1);
  }

  bool operator==(const FeaturizerConfig&) const = default;
};

/// Per-frame descriptor: grid-cell means of the channel-averaged intensity,
/// then [mean, std, mean |dI/dx|, mean |dI/dy|].
std::vector<double> frame_features(const Frame& frame, int grid);

/// Frame indices picked by stack-k: k uniformly spaced centres, repeating
/// frames when the clip is shorter than k.
std::vector<std::size_t> stack_indices(std::size_t frame_count, int k);

FeatureVector featurize(const Sample& sample, const FeaturizerConfig& config);
FeatureVector featurize_frames(std::span<const Frame> frames, const FeaturizerConfig& config);

/// Copy of `manifest` with every sample featurized; parallel over samples.
Manifest featurize_manifest(const Manifest& manifest, const FeaturizerConfig& config);

}  // namespace omni
