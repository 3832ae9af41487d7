#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/classifier.hpp"
#include "omni/rng.hpp"
#include "omni/types.hpp"

namespace omni {

struct SnippetConfig {
  double sample_fps = 1.0;
  double threshold = 0.5;
  int n_pos = 1;
  int n_neg = 2;

  void validate() const;
};

struct ClipConfig {
  double clip_seconds = 10.0;
  double threshold = 0.5;

  void validate() const;
};

struct FrameScore {
  std::size_t frame_index = 0;
  double confidence = 0.0;
  std::size_t cls = 0;
  bool positive = false;
};

/// Scores frames 0, s, 2s, ... with s = floor(fps / sample_fps) using a
/// segment-average teacher; a frame is positive iff confidence >= threshold.
std::vector<FrameScore> score_frames(const Sample& video, const ClassifierModel& teacher,
                                     const SnippetConfig& config);

/// Builds floor(#positives / n_pos) snippets. Positives are shuffled and
/// used once each; every snippet adds n_neg negatives drawn without
/// replacement. Frames stay in timestamp order. The pseudo-label is the
/// majority class of the snippet's positives (ties go to the class of the
/// most confident tied frame) and the confidence their mean. Videos short
/// of n_pos positives or n_neg negatives yield nothing.
std::vector<Sample> build_snippets(const Sample& video, const std::vector<FrameScore>& scores,
                                   const SnippetConfig& config, RngStream& rng);

struct ClipWindow {
  std::size_t begin = 0;  // frame index, inclusive
  std::size_t end = 0;    // exclusive
  double confidence = 0.0;
  std::size_t cls = 0;
  bool kept = false;
};

struct ClipResult {
  std::vector<ClipWindow> windows;
  std::vector<Sample> clips;
};

/// Partitions the video into consecutive clip_seconds windows (the partial
/// tail is dropped), scores each window with a stack-k teacher and keeps
/// those at or above the threshold.
ClipResult cut_clips(const Sample& video, const ClassifierModel& teacher, const ClipConfig& config);

struct TrimReport {
  std::size_t videos = 0;
  std::size_t scored_units = 0;  // frames (snippets) or windows (clips)
  std::size_t positive_units = 0;
  std::size_t emitted = 0;
  std::size_t empty_videos = 0;
  std::vector<std::size_t> emitted_histogram;

  nlohmann::json to_json() const;
};

struct TrimResult {
  Manifest auxiliary;
  TrimReport report;
};

/// Snippets for every untrimmed video of a pool. Video v draws from stream
/// (seed, "snippets/<id>").
TrimResult snippets_from_pool(const Manifest& pool, const ClassifierModel& teacher,
                              const SnippetConfig& config, std::uint64_t seed);
TrimResult clips_from_pool(const Manifest& pool, const ClassifierModel& teacher,
                           const ClipConfig& config);

}  // namespace omni
