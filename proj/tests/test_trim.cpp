#include <doctest.h>

#include <cmath>
#include <set>

#include "omni/classifier.hpp"
#include "omni/error.hpp"
#include "omni/featurize.hpp"
#include "omni/teacher.hpp"
#include "omni/trim.hpp"
#include "test_support.hpp"

using namespace omni;

namespace {

FeaturizerConfig grid1() {
  FeaturizerConfig fc;
  fc.grid = 1;
  return fc;
}

/// Two-class 2d teacher on the grid-1 featurizer. A constant frame of value
/// v scores sigmoid(10 v - 5) for class 0: bright and dark frames are
/// confident, mid-grey frames are not.
ClassifierModel brightness_teacher() {
  ClassifierModel m = ClassifierModel::linear(5, 2, grid1());
  m.params()[0] = 10.0;
  m.params()[10] = -5.0;
  return m;
}

Sample untrimmed(const std::string& id, std::vector<Frame> frames, double fps) {
  Sample v;
  v.id = id;
  v.source_kind = SourceKind::kUntrimmed;
  v.frames = std::move(frames);
  v.fps = fps;
  return v;
}

std::vector<FrameScore> scores_from(const std::vector<double>& conf, double threshold) {
  std::vector<FrameScore> out;
  for (std::size_t i = 0; i < conf.size(); ++i) out.push_back({i, conf[i], 0, conf[i] >= threshold});
  return out;
}

}  // namespace

TEST_CASE("score_frames: stride arithmetic and boundaries") {
  std::vector<Frame> frames;
  for (int i = 0; i < 40; ++i) frames.push_back(Frame(4, 4, 1, static_cast<float>(i % 5) / 4.0f));
  const Sample video = untrimmed("v", frames, 4.0);
  SnippetConfig cfg;
  cfg.sample_fps = 1.0;
  cfg.threshold = 0.9;
  const auto scores = score_frames(video, brightness_teacher(), cfg);
  REQUIRE(scores.size() == 10);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i].frame_index == 4 * i);
    const double v = static_cast<double>((4 * i) % 5) / 4.0;
    const double p0 = 1.0 / (1.0 + std::exp(-(10.0 * v - 5.0)));
    CHECK(scores[i].confidence == doctest::Approx(std::max(p0, 1.0 - p0)).epsilon(1e-6));
    CHECK(scores[i].positive == (scores[i].confidence >= 0.9));
  }

  cfg.threshold = 0.0;
  for (const auto& s : score_frames(video, brightness_teacher(), cfg)) CHECK(s.positive);

  const ClassifierModel uniform = ClassifierModel::linear(5, 4, grid1());
  cfg.threshold = 0.3;
  for (const auto& s : score_frames(video, uniform, cfg)) {
    CHECK(s.confidence == doctest::Approx(0.25));
    CHECK_FALSE(s.positive);
  }

  const Sample short_video = untrimmed("s", {Frame(4, 4), Frame(4, 4)}, 4.0);
  CHECK_THROWS_AS(score_frames(short_video, brightness_teacher(), cfg), ValidationError);
}

TEST_CASE("build_snippets: one positive and two negatives") {
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(Frame(2, 2, 1, 0.1f * static_cast<float>(i)));
  const Sample video = untrimmed("v", frames, 1.0);
  const auto scores = scores_from({0.9, 0.8, 0.2, 0.1, 0.05}, 0.5);
  SnippetConfig cfg;
  cfg.threshold = 0.5;
  RngStream rng(81, "snip");
  const auto snippets = build_snippets(video, scores, cfg, rng);
  REQUIRE(snippets.size() == 2);
  std::set<float> positives_used;
  for (const auto& s : snippets) {
    REQUIRE(s.frames.size() == 3);
    int from_first_two = 0;
    float last = -1.0f;
    for (const auto& f : s.frames) {
      const float v = f.pixels()[0];
      CHECK(v > last);  // timestamp order
      last = v;
      if (v < 0.15f) {
        ++from_first_two;
        positives_used.insert(v);
      }
    }
    CHECK(from_first_two == 1);
    CHECK(s.source_kind == SourceKind::kTrimmed);
    CHECK(s.pseudo_label == 0);
  }
  CHECK(positives_used.size() == 2);  // each positive used once
}

TEST_CASE("build_snippets: positives only and empty cases") {
  std::vector<Frame> frames(6, Frame(2, 2));
  const Sample video = untrimmed("v", frames, 1.0);
  SnippetConfig cfg;
  cfg.n_pos = 3;
  cfg.n_neg = 0;
  RngStream rng(82, "pos");
  auto scores = scores_from({0.9, 0.95, 0.7, 0.8, 0.99, 0.6}, 0.5);
  const auto snippets = build_snippets(video, scores, cfg, rng);
  REQUIRE(snippets.size() == 2);
  for (const auto& s : snippets) CHECK(s.frames.size() == 3);
  const double conf_total = *snippets[0].confidence + *snippets[1].confidence;
  CHECK(conf_total == doctest::Approx((0.9 + 0.95 + 0.7 + 0.8 + 0.99 + 0.6) / 3.0));

  cfg.n_pos = 1;
  cfg.n_neg = 2;
  CHECK(build_snippets(video, scores_from({0.1, 0.2, 0.3}, 0.5), cfg, rng).empty());
  CHECK(build_snippets(video, scores_from({0.9, 0.2}, 0.5), cfg, rng).empty());  // one negative short
}

TEST_CASE("build_snippets: majority label with confidence tie-break") {
  std::vector<Frame> frames(4, Frame(2, 2));
  const Sample video = untrimmed("v", frames, 1.0);
  std::vector<FrameScore> scores{{0, 0.7, 2, true}, {1, 0.9, 1, true}, {2, 0.6, 2, true}, {3, 0.95, 0, true}};
  SnippetConfig cfg;
  cfg.n_pos = 4;
  cfg.n_neg = 0;
  RngStream rng(83, "vote");
  auto snippets = build_snippets(video, scores, cfg, rng);
  REQUIRE(snippets.size() == 1);
  CHECK(snippets[0].pseudo_label == 2);

  scores = {{0, 0.7, 2, true}, {1, 0.9, 1, true}};
  cfg.n_pos = 2;
  snippets = build_snippets(video, scores, cfg, rng);
  REQUIRE(snippets.size() == 1);
  CHECK(snippets[0].pseudo_label == 1);
}

TEST_CASE("snippet count and composition on random videos") {
  RngStream rng(84, "random");
  const ClassifierModel teacher = brightness_teacher();
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Frame> frames;
    const std::size_t n = 3 + rng.index(20);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(Frame(4, 4, 1, static_cast<float>(rng.uniform())));
    const Sample video = untrimmed("v" + std::to_string(trial), frames, 1.0);
    SnippetConfig cfg;
    cfg.threshold = 0.6 + 0.35 * rng.uniform();
    cfg.n_pos = 1 + static_cast<int>(rng.index(3));
    cfg.n_neg = static_cast<int>(rng.index(3));
    const auto scores = score_frames(video, teacher, cfg);
    std::size_t positives = 0;
    std::size_t negatives = 0;
    for (const auto& s : scores) (s.positive ? positives : negatives) += 1;
    const auto snippets = build_snippets(video, scores, cfg, rng);
    const bool feasible = positives >= static_cast<std::size_t>(cfg.n_pos) &&
                          negatives >= static_cast<std::size_t>(cfg.n_neg);
    CHECK(snippets.size() == (feasible ? positives / cfg.n_pos : 0));
    for (const auto& s : snippets) {
      int pos = 0;
      int neg = 0;
      for (const auto& f : s.frames) {
        const auto p = predict_proba(teacher, featurize_frames(std::span(&f, 1), teacher.featurizer()));
        (p[argmax(p)] >= cfg.threshold ? pos : neg) += 1;
      }
      CHECK(pos == cfg.n_pos);
      CHECK(neg == cfg.n_neg);
    }
  }
}

TEST_CASE("snippets_from_pool is seeded per video") {
  Manifest pool;
  pool.role = ManifestRole::kWebPool;
  pool.label_space = LabelSpace::numbered(2);
  RngStream rng(85, "pool");
  for (int v = 0; v < 4; ++v) {
    std::vector<Frame> frames;
    for (int i = 0; i < 12; ++i) frames.push_back(Frame(4, 4, 1, static_cast<float>(rng.uniform())));
    pool.samples.push_back(untrimmed("video" + std::to_string(v), frames, 1.0));
  }
  SnippetConfig cfg;
  cfg.threshold = 0.8;
  const auto a = snippets_from_pool(pool, brightness_teacher(), cfg, 3);
  CHECK(a.auxiliary == snippets_from_pool(pool, brightness_teacher(), cfg, 3).auxiliary);
  CHECK(a.report.videos == 4);
  CHECK(a.report.scored_units == 48);
  CHECK(a.report.emitted == a.auxiliary.size());
  CHECK_NOTHROW(a.auxiliary.validate());

  Manifest reversed = pool;
  std::reverse(reversed.samples.begin(), reversed.samples.end());
  const auto b = snippets_from_pool(reversed, brightness_teacher(), cfg, 3);
  std::set<std::string> ids_a;
  std::set<std::string> ids_b;
  for (const auto& s : a.auxiliary.samples) ids_a.insert(s.id);
  for (const auto& s : b.auxiliary.samples) ids_b.insert(s.id);
  CHECK(ids_a == ids_b);
}

TEST_CASE("cut_clips: partition arithmetic") {
  FeaturizerConfig fc = grid1();
  fc.consensus = Consensus::kStackK;
  fc.stack_k = 2;
  const ClassifierModel teacher = ClassifierModel::linear(10, 2, fc);
  std::vector<Frame> frames;
  for (int i = 0; i < 35; ++i) frames.push_back(Frame(4, 4, 1, static_cast<float>(i) / 35.0f));
  const Sample video = untrimmed("v", frames, 1.0);
  ClipConfig cfg;
  cfg.threshold = 0.0;
  const auto r = cut_clips(video, teacher, cfg);
  REQUIRE(r.windows.size() == 3);
  REQUIRE(r.clips.size() == 3);
  std::vector<Frame> rebuilt;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.windows[i].begin == 10 * i);
    CHECK(r.windows[i].end == 10 * (i + 1));
    rebuilt.insert(rebuilt.end(), r.clips[i].frames.begin(), r.clips[i].frames.end());
  }
  CHECK(rebuilt == std::vector<Frame>(frames.begin(), frames.begin() + 30));

  cfg.threshold = 1.0;
  const auto none = cut_clips(video, teacher, cfg);
  CHECK(none.clips.empty());
  CHECK(none.windows.size() == 3);

  const Sample short_video = untrimmed("s", std::vector<Frame>(frames.begin(), frames.begin() + 9), 1.0);
  CHECK(cut_clips(short_video, teacher, ClipConfig{}).windows.empty());
  CHECK_THROWS_AS(cut_clips(video, brightness_teacher(), cfg), ValidationError);  // 2d teacher
}

TEST_CASE("cut_clips keeps exactly the clip the teacher knows") {
  FeaturizerConfig fc;
  fc.grid = 1;
  fc.consensus = Consensus::kStackK;
  fc.stack_k = 3;
  // Class-0 logit 10 * (sum of the three sampled frame means) - 15: a
  // bright clip is confident, a mid-grey clip sits at exactly 0.5.
  ClassifierModel teacher = ClassifierModel::linear(15, 2, fc);
  for (std::size_t f = 0; f < 3; ++f) teacher.params()[5 * f] = 10.0;
  teacher.params()[30] = -15.0;

  RngStream rng(86, "clips");
  std::vector<Frame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(Frame(8, 8, 1, 0.5f));
  for (int i = 0; i < 10; ++i) frames.push_back(Frame(8, 8, 1, static_cast<float>(0.9 + 0.1 * rng.uniform())));
  for (int i = 0; i < 10; ++i) frames.push_back(Frame(8, 8, 1, 0.5f));
  const Sample video = untrimmed("v", frames, 1.0);
  ClipConfig cfg;
  cfg.threshold = 0.9;
  const auto r = cut_clips(video, teacher, cfg);
  REQUIRE(r.windows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    Sample clip;
    clip.id = "oracle";
    clip.source_kind = SourceKind::kTrimmed;
    clip.frames.assign(frames.begin() + 10 * i, frames.begin() + 10 * (i + 1));
    const auto p = predict_proba(teacher, featurize(clip, fc));
    CHECK(r.windows[i].kept == (p[argmax(p)] >= 0.9));
    CHECK(r.windows[i].confidence == doctest::Approx(p[argmax(p)]).epsilon(1e-12));
  }
  CHECK(r.windows[0].confidence == doctest::Approx(0.5).epsilon(1e-12));
  REQUIRE(r.clips.size() == 1);
  CHECK(r.windows[1].kept);
  CHECK(r.clips[0].pseudo_label == 0);
  CHECK(r.clips[0].id == "v#clip1");
  CHECK(r.clips[0].frames.size() == 10);
}

TEST_CASE("trim config validation") {
  SnippetConfig s;
  s.n_pos = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.n_pos = 1;
  s.threshold = 1.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  ClipConfig c;
  c.clip_seconds = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
