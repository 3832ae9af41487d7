#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/homography.hpp"
#include "omni/types.hpp"

namespace omni {

/// Desk-scale stand-in for crawled web data. Every class is a Gaussian blob
/// at one of its fixed sites on rings around the frame centre;
/// out-of-distribution samples put the blob between two class sites.
struct SynthSpec {
  std::size_t num_classes = 8;
  int width = 32;
  int height = 32;

  std::size_t target_size = 400;
  std::size_t validation_size = 400;
  int clip_frames = 4;

  std::size_t image_pool_size = 2000;
  std::size_t trimmed_pool_size = 400;
  std::size_t untrimmed_pool_size = 60;
  /// Fraction of each pool that is out of distribution.
  double noise_fraction = 0.6;
  /// Probability an out-of-distribution sample between classes c and c+1 is
  /// filed under class c + ood_query_shift (otherwise a uniform class).
  double ood_adjacent_bias = 1.0;
  int ood_query_shift = 0;
  /// Angular position of out-of-distribution blobs between class c (0) and
  /// class c+1 (1).
  double ood_offset = 0.8;
  /// Class frequencies proportional to exp(-skew * c). Validation is always
  /// balanced.
  double target_class_skew = 0.0;
  /// Pool skew counts from class 0 for images, K/3 for trimmed clips and
  /// 2K/3 for untrimmed videos.
  double pool_class_skew = 0.0;

  double ring_radius = 9.0;
  /// Blob sites per class, one per ring. Ring m has radius
  /// ring_radius + (m - (modes - 1) / 2) * ring_spacing and is rotated by
  /// m * ring_twist class spacings.
  std::size_t modes_per_class = 1;
  double ring_spacing = 4.0;
  double ring_twist = 0.5;
  double blob_sigma = 2.5;
  double blob_amplitude = 0.6;
  double background = 0.2;
  double position_jitter = 1.0;   // px, per sample
  double motion_per_frame = 0.5;  // px, per clip frame
  double pixel_noise = 0.2;       // target and validation
  double web_pixel_noise = 0.15;
  double clutter_probability = 1.0;
  double web_clutter_probability = 0.5;
  double clutter_amplitude = 0.8;
  double clutter_sigma = 7.0;

  double untrimmed_fps = 2.0;
  double untrimmed_seconds = 24.0;
  double segment_seconds = 4.0;
  /// Share of an in-distribution video's segments showing its class.
  double untrimmed_class_fraction = 0.5;

  std::size_t warp_sequences = 64;
  int warp_steps = 8;
  /// Std-dev of per-step camera motion in normalised units.
  double camera_jitter = 0.01;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct BlobArchetype {
  double x = 0.0;  // pixel coordinates of the centre
  double y = 0.0;
  double sigma = 1.0;
};

/// [class][mode] blob sites.
std::vector<std::vector<BlobArchetype>> class_archetypes(const SynthSpec& spec);
/// Same layout shifted by ood_offset class spacings, so site [c][m] sits
/// between classes c and c+1 on ring m.
std::vector<std::vector<BlobArchetype>> ood_archetypes(const SynthSpec& spec);

/// Hidden ground truth of one pool sample. generating_class is -1 for
/// out-of-distribution samples; query_class is the class the sample was
/// filed under, as a keyword search would.
struct SidecarEntry {
  std::string id;
  int generating_class = -1;
  int query_class = 0;
};

struct SynthData {
  Manifest target;
  Manifest validation;
  Manifest image_pool;
  Manifest trimmed_pool;
  Manifest untrimmed_pool;
  std::vector<HomographySequence> sequences;
  std::vector<SidecarEntry> image_sidecar;
  std::vector<SidecarEntry> trimmed_sidecar;
  std::vector<SidecarEntry> untrimmed_sidecar;
};

SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// The pool as a keyword crawl would label it: every sample pseudo-labeled
/// with its query class at confidence 1, no filtering.
Manifest query_labeled(const Manifest& pool, const std::vector<SidecarEntry>& sidecar);

nlohmann::json sidecar_to_json(const SynthData& data);

/// Writes target.jsonl, validation.jsonl, pool_images.jsonl,
/// pool_trimmed.jsonl, pool_untrimmed.jsonl, homographies.json, sidecar.json
/// and synth_spec.json into `dir`.
void save_synthetic(const SynthData& data, const SynthSpec& spec, const std::filesystem::path& dir);

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path, const std::string& pool);

}  // namespace omni
