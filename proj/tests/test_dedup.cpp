#include <doctest.h>

#include <cmath>
#include <set>

#include "omni/dedup.hpp"
#include "omni/error.hpp"
#include "omni/featurize.hpp"
#include "test_support.hpp"

using namespace omni;

namespace {

std::vector<FeatureVector> as_features(const std::vector<std::vector<double>>& xs) {
  std::vector<FeatureVector> out;
  for (const auto& x : xs) out.push_back(FeatureVector{x});
  return out;
}

/// Sample mean and 1/n covariance of a vector set, by plain loops.
void moments(const std::vector<FeatureVector>& fs, std::vector<double>& mean, std::vector<double>& cov) {
  const std::size_t d = fs.front().dims();
  const double n = static_cast<double>(fs.size());
  mean.assign(d, 0.0);
  cov.assign(d * d, 0.0);
  for (const auto& f : fs) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += f.values[i] / n;
  }
  for (const auto& f : fs) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += (f.values[i] - mean[i]) * (f.values[j] - mean[j]) / n;
    }
  }
}

Manifest frame_manifest(const std::vector<Frame>& frames, const std::string& prefix, ManifestRole role) {
  Manifest m;
  m.role = role;
  m.label_space = LabelSpace::numbered(2);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Sample s = test::image_sample(prefix + std::to_string(i), frames[i]);
    if (role != ManifestRole::kWebPool) s.label = 0;
    m.samples.push_back(std::move(s));
  }
  return m;
}

DedupConfig fixed(double threshold, bool whiten = true) {
  DedupConfig cfg;
  cfg.threshold_override = threshold;
  cfg.whiten = whiten;
  return cfg;
}

}  // namespace

TEST_CASE("cosine similarity identities") {
  RngStream rng(51, "cosine");
  for (int i = 0; i < 20; ++i) {
    auto x = test::random_vector(9, rng);
    std::vector<double> neg(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) neg[j] = -x[j];
    CHECK(std::abs(cosine_similarity(x, x) - 1.0) < 1e-12);
    CHECK(std::abs(cosine_similarity(x, neg) + 1.0) < 1e-12);
  }
  CHECK(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 3}) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("whitening yields zero mean and identity covariance") {
  RngStream rng(52, "whiten");
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 500; ++i) {
    // Five independent sources mixed into correlated, full-rank columns.
    double z[5];
    for (double& v : z) v = rng.normal();
    xs.push_back({3.0 + 2.0 * z[0], -1.0 + z[0] + 0.5 * z[1], 0.1 * z[1] + 0.3 * z[2], z[3], 4.0 * z[0] - z[1] + z[4]});
  }
  const auto r = whiten(as_features(xs));
  std::vector<double> mean;
  std::vector<double> cov;
  moments(r.features, mean, cov);
  for (double m : mean) CHECK(std::abs(m) < 1e-9);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(cov[i * 5 + j] - (i == j ? 1.0 : 0.0)) < 1e-6);
  }
  CHECK(r.transform.floored_eigenvalues == 0);
  CHECK_THROWS_AS(whiten(as_features({{1.0, 2.0}})), ValidationError);
}

TEST_CASE("whitening an already white sample is close to the identity") {
  RngStream rng(53, "white");
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(test::random_vector(4, rng));
  const auto t = fit_whitening(as_features(xs));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(t.matrix[i * 4 + j] - (i == j ? 1.0 : 0.0)) < 0.1);
  }
}

TEST_CASE("rank-deficient data hits the eigenvalue floor without NaN") {
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 20; ++i) xs.push_back({0.1 * i, 0.2 * i});
  const auto r = whiten(as_features(xs));
  CHECK(r.transform.floored_eigenvalues == 1);
  for (const auto& f : r.features) {
    for (double v : f.values) CHECK(std::isfinite(v));
  }
  std::vector<double> mean;
  std::vector<double> cov;
  moments(r.features, mean, cov);
  for (double m : mean) CHECK(std::abs(m) < 1e-9);
}

TEST_CASE("derive_threshold: full-frame crops give exactly 1") {
  RngStream rng(54, "crops");
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(test::random_frame(32, 32, rng));
  DedupConfig cfg;
  cfg.crop_min_ratio = 1.0;
  cfg.crop_max_ratio = 1.0;
  CHECK(std::abs(derive_threshold(frames, cfg) - 1.0) < 1e-9);
  cfg.whiten = false;
  CHECK(std::abs(derive_threshold(frames, cfg) - 1.0) < 1e-9);
}

TEST_CASE("derive_threshold: bounded and deterministic") {
  std::vector<Frame> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(test::smooth_frame(32, 32, 0.7 * i));
  DedupConfig cfg;
  cfg.seed = 5;
  const double t = derive_threshold(frames, cfg);
  CHECK(t >= -1.0);
  CHECK(t <= 1.0);
  CHECK(t < 1.0);
  CHECK(derive_threshold(frames, cfg) == t);
  cfg.seed = 6;
  CHECK(derive_threshold(frames, cfg) != t);

  cfg.crops_per_frame = 1;
  CHECK_THROWS_AS(derive_threshold(frames, cfg), ValidationError);
  cfg.crops_per_frame = 4;
  const std::vector<Frame> tiny{Frame(1, 4)};
  CHECK_THROWS_AS(derive_threshold(tiny, cfg), ValidationError);
}

TEST_CASE("dedup flags an exact copy of a reference frame") {
  RngStream rng(55, "copy");
  std::vector<Frame> refs;
  std::vector<Frame> web;
  for (int i = 0; i < 30; ++i) refs.push_back(test::random_frame(16, 16, rng));
  for (int i = 0; i < 30; ++i) web.push_back(test::random_frame(16, 16, rng));
  web[7] = refs[12];
  const Manifest references = frame_manifest(refs, "ref", ManifestRole::kValidation);
  const Manifest pool = frame_manifest(web, "web", ManifestRole::kWebPool);

  const auto r = dedup_pool(pool, references, fixed(0.95));
  REQUIRE(r.report.flagged == 1);
  REQUIRE(r.report.pairs.size() == 1);
  CHECK(r.report.pairs[0].web_id == "web7");
  CHECK(r.report.pairs[0].reference_id == "ref12");
  CHECK(std::abs(r.report.pairs[0].similarity - 1.0) < 1e-6);
  CHECK(r.clean.size() == 29);
  for (const auto& s : r.clean.samples) CHECK(s.id != "web7");

  // Flag set survives uniform positive scaling of every feature.
  Manifest pool_f = featurize_manifest(pool, FeaturizerConfig{});
  Manifest refs_f = featurize_manifest(references, FeaturizerConfig{});
  for (Manifest* m : {&pool_f, &refs_f}) {
    for (auto& s : m->samples) {
      for (double& v : s.feature->values) v *= 7.5;
    }
  }
  const auto scaled = dedup_pool(pool_f, refs_f, fixed(0.95));
  REQUIRE(scaled.report.flagged == 1);
  CHECK(scaled.report.pairs[0].web_id == "web7");

  // Re-running on the cleaned pool flags nothing.
  CHECK(dedup_pool(r.clean, references, fixed(0.95)).report.flagged == 0);
}

TEST_CASE("every flagged similarity reaches the threshold") {
  RngStream rng(56, "flagged");
  std::vector<Frame> refs;
  std::vector<Frame> web;
  for (int i = 0; i < 20; ++i) refs.push_back(test::smooth_frame(16, 16, 0.3 * i));
  for (int i = 0; i < 20; ++i) web.push_back(test::smooth_frame(16, 16, 0.3 * i + 0.05 * rng.uniform()));
  const Manifest references = frame_manifest(refs, "r", ManifestRole::kTarget);
  const Manifest pool = frame_manifest(web, "w", ManifestRole::kWebPool);
  DedupConfig cfg;
  cfg.seed = 3;
  const auto r = dedup_pool(pool, references, cfg);
  CHECK(r.report.threshold_derived);
  for (const auto& p : r.report.pairs) CHECK(p.similarity >= r.report.threshold);
  std::set<std::string> flagged;
  for (const auto& p : r.report.pairs) flagged.insert(p.web_id);
  CHECK(flagged.size() == r.report.flagged);
  CHECK(r.clean.size() + r.report.flagged == pool.size());
}

TEST_CASE("empty references flag nothing") {
  RngStream rng(57, "empty");
  const Manifest pool = frame_manifest({test::random_frame(8, 8, rng)}, "w", ManifestRole::kWebPool);
  Manifest none = frame_manifest({}, "r", ManifestRole::kTarget);
  const auto r = dedup_pool(pool, none, DedupConfig{});
  CHECK(r.report.flagged == 0);
  CHECK(r.clean == pool);
}

TEST_CASE("orthogonal pool and references") {
  // References e0..e2, pool e3..e5. Unwhitened similarities are exactly 0.
  std::vector<std::vector<double>> ref_x;
  std::vector<std::vector<double>> web_x;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> e(6, 0.0);
    e[i] = 1.0;
    (i < 3 ? ref_x : web_x).push_back(e);
  }
  const Manifest refs = test::feature_manifest(ref_x, {0, 0, 0}, 2);
  const Manifest pool = test::feature_manifest(web_x, {0, 0, 0}, 2, ManifestRole::kWebPool);

  const auto raw = dedup_pool(pool, refs, fixed(-1.0, false));
  REQUIRE(raw.report.pairs.size() == 9);
  for (const auto& p : raw.report.pairs) CHECK(p.similarity == 0.0);
  CHECK(dedup_pool(pool, refs, fixed(1e-9, false)).report.flagged == 0);

  // Union whitening of the six basis vectors maps them to a regular simplex
  // centred at the origin, where distinct vertices have cosine -1/5.
  const auto white = dedup_pool(pool, refs, fixed(-1.0, true));
  REQUIRE(white.report.pairs.size() == 9);
  for (const auto& p : white.report.pairs) CHECK(p.similarity == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(dedup_pool(pool, refs, fixed(1e-9, true)).report.flagged == 0);
}

TEST_CASE("dedup errors") {
  const Manifest refs = test::feature_manifest({{1.0, 0.0}, {0.0, 1.0}}, {0, 1}, 2);
  const Manifest pool = test::feature_manifest({{1.0, 0.0, 0.0}}, {0}, 2, ManifestRole::kWebPool);
  CHECK_THROWS_AS(dedup_pool(pool, refs, fixed(0.9)), ValidationError);
  // Feature-only references cannot derive a threshold.
  const Manifest pool2 = test::feature_manifest({{1.0, 0.5}}, {0}, 2, ManifestRole::kWebPool);
  CHECK_THROWS_AS(dedup_pool(pool2, refs, DedupConfig{}), ValidationError);
  DedupConfig bad;
  bad.crop_min_ratio = 0.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
