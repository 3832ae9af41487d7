#include "omni/trim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {

void SnippetConfig::validate() const {
  if (!(sample_fps > 0.0)) throw ValidationError("snippets: sample_fps must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("snippets: threshold must be in [0,1]");
  if (n_pos < 1 || n_neg < 0) throw ValidationError("snippets: need n_pos >= 1 and n_neg >= 0");
}

void ClipConfig::validate() const {
  if (!(clip_seconds > 0.0)) throw ValidationError("clips: clip_seconds must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("clips: threshold must be in [0,1]");
}

nlohmann::json TrimReport::to_json() const {
  return {{"videos", videos},         {"scored_units", scored_units},
          {"positive_units", positive_units}, {"emitted", emitted},
          {"empty_videos", empty_videos},     {"emitted_histogram", emitted_histogram}};
}

std::vector<FrameScore> score_frames(const Sample& video, const ClassifierModel& teacher,
                                     const SnippetConfig& config) {
  config.validate();
  if (video.source_kind != SourceKind::kUntrimmed) {
    throw ValidationError("score_frames: sample '" + video.id + "' is not an untrimmed video");
  }
  if (teacher.consensus() != Consensus::kSegmentAverage) {
    throw ValidationError("score_frames needs a segment-average (2d) teacher");
  }
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::floor(video.fps / config.sample_fps)));
  if (video.frames.size() < stride) {
    throw ValidationError("score_frames: video '" + video.id + "' is shorter than one stride");
  }
  std::vector<FrameScore> scores;
  for (std::size_t f = 0; f < video.frames.size(); f += stride) {
    const auto p = predict_proba(teacher, featurize_frames(std::span(&video.frames[f], 1),
                                                           teacher.featurizer()));
    const std::size_t c = argmax(p);
    scores.push_back({f, p[c], c, p[c] >= config.threshold});
  }
  return scores;
}

std::vector<Sample> build_snippets(const Sample& video, const std::vector<FrameScore>& scores,
                                   const SnippetConfig& config, RngStream& rng) {
  config.validate();
  std::vector<FrameScore> pos;
  std::vector<FrameScore> neg;
  for (const auto& s : scores) (s.positive ? pos : neg).push_back(s);
  const auto n_pos = static_cast<std::size_t>(config.n_pos);
  const auto n_neg = static_cast<std::size_t>(config.n_neg);
  if (pos.size() < n_pos || neg.size() < n_neg) return {};

  rng.shuffle(pos);
  const std::size_t count = pos.size() / n_pos;
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<FrameScore> chosen(pos.begin() + static_cast<std::ptrdiff_t>(k * n_pos),
                                   pos.begin() + static_cast<std::ptrdiff_t>((k + 1) * n_pos));
    // Partial Fisher-Yates over a copy: negatives without replacement.
    std::vector<FrameScore> pool = neg;
    for (std::size_t j = 0; j < n_neg; ++j) {
      const std::size_t r = j + rng.index(pool.size() - j);
      std::swap(pool[j], pool[r]);
      chosen.push_back(pool[j]);
    }

    std::map<std::size_t, std::size_t> votes;
    double conf_sum = 0.0;
    for (std::size_t j = 0; j < n_pos; ++j) {
      ++votes[chosen[j].cls];
      conf_sum += chosen[j].confidence;
    }
    std::size_t best_votes = 0;
    for (const auto& [cls, v] : votes) best_votes = std::max(best_votes, v);
    const FrameScore* lead = nullptr;
    for (std::size_t j = 0; j < n_pos; ++j) {
      if (votes[chosen[j].cls] != best_votes) continue;
      if (!lead || chosen[j].confidence > lead->confidence) lead = &chosen[j];
    }
    const int label = static_cast<int>(lead->cls);  // read before the sort moves *lead

    std::sort(chosen.begin(), chosen.end(),
              [](const FrameScore& a, const FrameScore& b) { return a.frame_index < b.frame_index; });
    Sample snip;
    snip.id = video.id + "#snippet" + std::to_string(k);
    snip.source_kind = SourceKind::kTrimmed;
    snip.fps = video.fps;
    snip.pseudo_label = label;
    snip.confidence = conf_sum / static_cast<double>(n_pos);
    for (const auto& c : chosen) snip.frames.push_back(video.frames.at(c.frame_index));
    out.push_back(std::move(snip));
  }
  return out;
}

ClipResult cut_clips(const Sample& video, const ClassifierModel& teacher, const ClipConfig& config) {
  config.validate();
  if (video.source_kind != SourceKind::kUntrimmed) {
    throw ValidationError("cut_clips: sample '" + video.id + "' is not an untrimmed video");
  }
  if (teacher.consensus() != Consensus::kStackK) {
    throw ValidationError("cut_clips needs a stack-k (3d) teacher");
  }
  const auto window = static_cast<std::size_t>(std::lround(config.clip_seconds * video.fps));
  if (window == 0) throw ValidationError("cut_clips: clip window rounds to zero frames");

  ClipResult result;
  const std::size_t count = video.frames.size() / window;
  for (std::size_t i = 0; i < count; ++i) {
    Sample clip;
    clip.id = video.id + "#clip" + std::to_string(i);
    clip.source_kind = SourceKind::kTrimmed;
    clip.fps = video.fps;
    clip.frames.assign(video.frames.begin() + static_cast<std::ptrdiff_t>(i * window),
                       video.frames.begin() + static_cast<std::ptrdiff_t>((i + 1) * window));
    const auto p = predict_proba(teacher, featurize(clip, teacher.featurizer()));
    const std::size_t c = argmax(p);
    ClipWindow w{i * window, (i + 1) * window, p[c], c, p[c] >= config.threshold};
    result.windows.push_back(w);
    if (w.kept) {
      clip.pseudo_label = static_cast<int>(c);
      clip.confidence = p[c];
      result.clips.push_back(std::move(clip));
    }
  }
  return result;
}

namespace {

TrimResult collect(const Manifest& pool, std::vector<std::vector<Sample>>& per_video,
                   std::vector<std::pair<std::size_t, std::size_t>>& units) {
  TrimResult r;
  r.auxiliary.role = ManifestRole::kAuxiliary;
  r.auxiliary.label_space = pool.label_space;
  r.report.videos = pool.size();
  r.report.emitted_histogram.assign(pool.label_space.size(), 0);
  for (std::size_t v = 0; v < per_video.size(); ++v) {
    r.report.scored_units += units[v].first;
    r.report.positive_units += units[v].second;
    if (per_video[v].empty()) ++r.report.empty_videos;
    for (auto& s : per_video[v]) {
      ++r.report.emitted_histogram[static_cast<std::size_t>(*s.pseudo_label)];
      r.auxiliary.samples.push_back(std::move(s));
    }
  }
  r.report.emitted = r.auxiliary.size();
  return r;
}

void require_pool(const Manifest& pool, const ClassifierModel& teacher) {
  if (pool.role != ManifestRole::kWebPool) throw ValidationError("trim expects a web pool manifest");
  if (teacher.num_classes() != pool.label_space.size()) {
    throw ValidationError("trim: teacher K does not match the pool label space");
  }
}

}  // namespace

TrimResult snippets_from_pool(const Manifest& pool, const ClassifierModel& teacher,
                              const SnippetConfig& config, std::uint64_t seed) {
  require_pool(pool, teacher);
  std::vector<std::vector<Sample>> per_video(pool.size());
  std::vector<std::pair<std::size_t, std::size_t>> units(pool.size());
  parallel_for(pool.size(), [&](std::size_t v) {
    const Sample& video = pool.samples[v];
    const auto scores = score_frames(video, teacher, config);
    std::size_t positives = 0;
    for (const auto& s : scores) positives += s.positive ? 1 : 0;
    units[v] = {scores.size(), positives};
    RngStream rng(seed, "snippets/" + video.id);
    per_video[v] = build_snippets(video, scores, config, rng);
  });
  return collect(pool, per_video, units);
}

TrimResult clips_from_pool(const Manifest& pool, const ClassifierModel& teacher,
                           const ClipConfig& config) {
  require_pool(pool, teacher);
  std::vector<std::vector<Sample>> per_video(pool.size());
  std::vector<std::pair<std::size_t, std::size_t>> units(pool.size());
  parallel_for(pool.size(), [&](std::size_t v) {
    auto r = cut_clips(pool.samples[v], teacher, config);
    std::size_t kept = 0;
    for (const auto& w : r.windows) kept += w.kept ? 1 : 0;
    units[v] = {r.windows.size(), kept};
    per_video[v] = std::move(r.clips);
  });
  return collect(pool, per_video, units);
}

}  // namespace omni
