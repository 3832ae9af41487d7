#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "omni/homography.hpp"
#include "omni/types.hpp"

namespace omni {

enum class InflateMode { kReplicate, kTranslateRandom, kTranslateConstant, kWarp };

std::string_view to_string(InflateMode mode);
InflateMode parse_inflate_mode(std::string_view text);

struct InflateConfig {
  InflateMode mode = InflateMode::kReplicate;
  int clip_len = 8;
  /// translate-constant: displacement in pixels per step.
  double speed_x = 1.0;
  double speed_y = 0.0;
  /// translate-random: per-step displacement uniform in [-range, range] px.
  double translate_range = 1.0;
  Fill fill;
  /// warp: class-specific models are preferred when the sample's class has
  /// one, otherwise the class-agnostic model is used.
  std::vector<WarpModel> warp_models;

  void validate() const;
};

struct InflatedClip {
  Sample clip;
  /// H_2 .. H_N; frame i+1 is frame i warped by steps[i].
  std::vector<Homography> steps;
};

/// Turns a still image into an N-frame pseudo clip, J_1 = I and
/// J_i = H_i(J_{i-1}). The clip keeps the image's label, pseudo-label and
/// confidence; its id gets a "#inflated" suffix.
InflatedClip inflate_image_with_chain(const Sample& image, const InflateConfig& config,
                                      RngStream& rng);
Sample inflate_image(const Sample& image, const InflateConfig& config, RngStream& rng);

/// Inflates every image of `manifest`; image i uses stream
/// (seed, "inflate/<id>") so results do not depend on scheduling.
Manifest inflate_manifest(const Manifest& manifest, const InflateConfig& config, std::uint64_t seed);

}  // namespace omni
