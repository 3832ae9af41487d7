#include "omni/filtering.hpp"

#include <string>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {

void FilterConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("filter threshold must be in [0,1]");
  }
}

nlohmann::json FilterReport::to_json() const {
  return {{"pool_size", pool_size},     {"kept", kept},
          {"rejected", rejected},       {"rejection_rate", rejection_rate()},
          {"threshold", threshold},     {"kept_histogram", kept_histogram}};
}

namespace {

struct Score {
  double confidence = 0.0;
  std::size_t cls = 0;
};

Score score_probabilities(const std::vector<double>& p) {
  const std::size_t c = argmax(p);
  return {p[c], c};
}

Score score_sample(const Sample& s, std::span<const ClassifierModel> teachers,
                   const FilterConfig& config) {
  if (s.source_kind == SourceKind::kImage && config.teacher_kind == TeacherKind::k3d) {
    throw ValidationError("sample '" + s.id + "': images can only be filtered by 2d teachers");
  }
  if (s.source_kind != SourceKind::kUntrimmed) return score_probabilities(ensemble_proba(teachers, s));
  if (!config.per_frame) {
    throw ValidationError("sample '" + s.id +
                          "': untrimmed videos need per-frame scoring or the trim stage");
  }
  Score best;
  bool first = true;
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    Sample frame;
    frame.id = s.id;
    frame.source_kind = SourceKind::kImage;
    frame.frames = {s.frames[f]};
    const Score sc = score_probabilities(ensemble_proba(teachers, frame));
    if (first || sc.confidence > best.confidence) best = sc;
    first = false;
  }
  return best;
}

}  // namespace

FilterResult filter_pool(const Manifest& pool, std::span<const ClassifierModel> teachers,
                         const FilterConfig& config) {
  config.validate();
  if (pool.role != ManifestRole::kWebPool) throw ValidationError("filter_pool expects a web pool");
  if (teachers.empty()) throw ValidationError("filter_pool needs at least one teacher");
  const Consensus want = config.teacher_kind == TeacherKind::k3d ? Consensus::kStackK
                                                                  : Consensus::kSegmentAverage;
  for (const auto& t : teachers) {
    if (t.num_classes() != pool.label_space.size()) {
      throw ValidationError("teacher K does not match the pool label space");
    }
    if (t.consensus() != want) {
      throw ValidationError("teacher consensus " + std::string(to_string(t.consensus())) +
                            " does not match the configured teacher kind");
    }
  }

  std::vector<Score> scores(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    scores[i] = score_sample(pool.samples[i], teachers, config);
  });

  FilterResult result;
  result.auxiliary.role = ManifestRole::kAuxiliary;
  result.auxiliary.label_space = pool.label_space;
  result.auxiliary.feature_dims = pool.feature_dims;
  result.report.pool_size = pool.size();
  result.report.threshold = config.threshold;
  result.report.kept_histogram.assign(pool.label_space.size(), 0);

  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (scores[i].confidence < config.threshold) continue;
    Sample s = pool.samples[i];
    s.label.reset();
    s.pseudo_label = static_cast<int>(scores[i].cls);
    s.confidence = scores[i].confidence;
    result.auxiliary.samples.push_back(std::move(s));
    ++result.report.kept_histogram[scores[i].cls];
  }
  result.report.kept = result.auxiliary.size();
  result.report.rejected = pool.size() - result.report.kept;
  return result;
}

std::vector<std::size_t> class_distribution(const Manifest& manifest) {
  std::vector<std::size_t> counts(manifest.label_space.size(), 0);
  for (const auto& s : manifest.samples) {
    const auto y = s.effective_label();
    if (!y) throw ValidationError("class_distribution: sample '" + s.id + "' has no label");
    if (!manifest.label_space.contains(*y)) {
      throw ValidationError("class_distribution: sample '" + s.id + "' label out of range");
    }
    ++counts[static_cast<std::size_t>(*y)];
  }
  return counts;
}

}  // namespace omni
