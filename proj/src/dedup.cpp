#include "omni/dedup.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "omni/error.hpp"
#include "omni/image_ops.hpp"
#include "omni/parallel.hpp"
#include "omni/rng.hpp"

namespace omni {

std::vector<double> WhiteningTransform::apply(std::span<const double> x) const {
  const std::size_t d = dims();
  if (x.size() != d) throw ValidationError("whitening: feature dims mismatch");
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - mean[i];
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double* row = matrix.data() + r * d;
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += row[c] * centered[c];
    out[r] = s;
  }
  return out;
}

WhiteningTransform WhiteningTransform::identity(std::size_t dims) {
  WhiteningTransform t;
  t.mean.assign(dims, 0.0);
  t.matrix.assign(dims * dims, 0.0);
  for (std::size_t i = 0; i < dims; ++i) t.matrix[i * dims + i] = 1.0;
  return t;
}

WhiteningTransform fit_whitening(std::span<const FeatureVector> features, double ridge) {
  if (features.size() < 2) throw ValidationError("whitening needs at least 2 vectors");
  const std::size_t d = features.front().dims();
  const std::size_t n = features.size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].dims() != d) throw ValidationError("whitening: feature dims mismatch");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = features[i].values[j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw RuntimeError("whitening: eigendecomposition failed");

  Eigen::VectorXd lambda = eig.eigenvalues();
  const double floor = std::max(ridge * std::max(lambda.maxCoeff(), 0.0),
                                std::numeric_limits<double>::min());
  WhiteningTransform t;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < floor) {
      lambda(i) = floor;
      ++t.floored_eigenvalues;
    }
  }
  const Eigen::MatrixXd& u = eig.eigenvectors();
  const Eigen::MatrixXd w = u * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose();
  t.mean.assign(mean.data(), mean.data() + d);
  t.matrix.resize(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) t.matrix[r * d + c] = w(static_cast<Eigen::Index>(r),
                                                                static_cast<Eigen::Index>(c));
  }
  return t;
}

WhitenResult whiten(std::span<const FeatureVector> features, double ridge) {
  WhitenResult r{{}, fit_whitening(features, ridge)};
  r.features.reserve(features.size());
  for (const auto& f : features) r.features.push_back(FeatureVector{r.transform.apply(f.values)});
  return r;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine_similarity: dims mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void DedupConfig::validate() const {
  if (!threshold_override && crops_per_frame < 2) {
    throw ValidationError("dedup: crops_per_frame must be >= 2 to derive a threshold");
  }
  if (!(crop_min_ratio >= 0.75 && crop_min_ratio <= crop_max_ratio && crop_max_ratio <= 1.0)) {
    throw ValidationError("dedup: crop ratios must satisfy 0.75 <= min <= max <= 1");
  }
  if (featurizer.consensus != Consensus::kSegmentAverage) {
    throw ValidationError("dedup compares frame-level features; use segment-average consensus");
  }
}

nlohmann::json DedupReport::to_json() const {
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& p : pairs) {
    pj.push_back({{"web_id", p.web_id}, {"reference_id", p.reference_id}, {"similarity", p.similarity}});
  }
  return {{"threshold", threshold},
          {"threshold_derived", threshold_derived},
          {"pool_size", pool_size},
          {"flagged", flagged},
          {"pairs", std::move(pj)}};
}

double derive_threshold(std::span<const Frame> frames, const DedupConfig& config,
                        const WhiteningTransform* transform) {
  if (config.crops_per_frame < 2) throw ValidationError("derive_threshold: need >= 2 crops per frame");
  if (frames.empty()) throw ValidationError("derive_threshold: no frames");
  RngStream rng(config.seed, "dedup/crops");
  const std::size_t per = static_cast<std::size_t>(config.crops_per_frame);
  std::vector<FeatureVector> crops;
  crops.reserve(frames.size() * per);
  for (const Frame& f : frames) {
    if (f.width() < 2 || f.height() < 2) throw ValidationError("derive_threshold: frame too small to crop");
    for (std::size_t c = 0; c < per; ++c) {
      const double rw = rng.uniform(config.crop_min_ratio, config.crop_max_ratio);
      const double rh = rng.uniform(config.crop_min_ratio, config.crop_max_ratio);
      const int w = std::clamp(static_cast<int>(std::lround(rw * f.width())), 1, f.width());
      const int h = std::clamp(static_cast<int>(std::lround(rh * f.height())), 1, f.height());
      const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(f.width() - w + 1)));
      const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(f.height() - h + 1)));
      const Frame crop = crop_and_resize(f, x0, y0, w, h);
      crops.push_back(FeatureVector{frame_features(crop, config.featurizer.grid)});
    }
  }

  std::vector<FeatureVector> space;
  if (transform) {
    for (const auto& c : crops) space.push_back(FeatureVector{transform->apply(c.values)});
  } else if (config.whiten) {
    space = whiten(crops, config.ridge).features;
  } else {
    space = crops;
  }

  double total = 0.0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < per; ++a) {
      for (std::size_t b = a + 1; b < per; ++b) {
        sum += cosine_similarity(space[f * per + a].values, space[f * per + b].values);
        ++pairs;
      }
    }
    total += sum / static_cast<double>(pairs);
  }
  return total / static_cast<double>(frames.size());
}

namespace {

FeatureVector dedup_feature(const Sample& s, const FeaturizerConfig& fc) {
  if (s.feature) return *s.feature;
  return featurize(s, fc);
}

}  // namespace

DedupResult dedup_pool(const Manifest& pool, const Manifest& references, const DedupConfig& config) {
  config.validate();
  DedupResult result;
  result.clean = pool;
  result.report.pool_size = pool.size();
  if (references.empty() || pool.empty()) {
    result.report.threshold = config.threshold_override.value_or(0.0);
    return result;
  }

  std::vector<FeatureVector> pool_f(pool.size());
  std::vector<FeatureVector> ref_f(references.size());
  parallel_for(pool.size(), [&](std::size_t i) { pool_f[i] = dedup_feature(pool.samples[i], config.featurizer); });
  parallel_for(references.size(), [&](std::size_t i) {
    ref_f[i] = dedup_feature(references.samples[i], config.featurizer);
  });
  const std::size_t d = ref_f.front().dims();
  for (const auto& f : pool_f) {
    if (f.dims() != d) throw ValidationError("dedup: pool and reference features differ in dims");
  }
  for (const auto& f : ref_f) {
    if (f.dims() != d) throw ValidationError("dedup: reference features differ in dims");
  }

  WhiteningTransform transform = WhiteningTransform::identity(d);
  if (config.whiten) {
    std::vector<FeatureVector> fit_set = ref_f;
    if (config.fit == WhitenFit::kUnion) fit_set.insert(fit_set.end(), pool_f.begin(), pool_f.end());
    if (fit_set.size() >= 2) transform = fit_whitening(fit_set, config.ridge);
  }

  if (config.threshold_override) {
    result.report.threshold = *config.threshold_override;
  } else {
    std::vector<Frame> frames;
    const std::size_t n_ref = references.size();
    const std::size_t take = std::min(config.threshold_frames, n_ref);
    for (std::size_t i = 0; i < take; ++i) {
      const Sample& s = references.samples[i * n_ref / take];
      if (!s.frames.empty()) frames.push_back(s.frames[s.frames.size() / 2]);
    }
    if (frames.empty()) {
      throw ValidationError("dedup: references carry no frames; pass an explicit threshold");
    }
    if (d != config.featurizer.frame_dims()) {
      throw ValidationError("dedup: stored features do not match the frame featurizer; pass an explicit threshold");
    }
    result.report.threshold = derive_threshold(frames, config, &transform);
    result.report.threshold_derived = true;
  }
  const double threshold = result.report.threshold;

  std::vector<std::vector<double>> ref_w(ref_f.size());
  for (std::size_t i = 0; i < ref_f.size(); ++i) ref_w[i] = transform.apply(ref_f[i].values);

  std::vector<std::vector<DedupPair>> hits(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    const auto w = transform.apply(pool_f[i].values);
    for (std::size_t r = 0; r < ref_w.size(); ++r) {
      const double sim = cosine_similarity(w, ref_w[r]);
      if (sim >= threshold) hits[i].push_back({pool.samples[i].id, references.samples[r].id, sim});
    }
  });

  result.clean.samples.clear();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (hits[i].empty()) {
      result.clean.samples.push_back(pool.samples[i]);
    } else {
      ++result.report.flagged;
      for (auto& p : hits[i]) result.report.pairs.push_back(std::move(p));
    }
  }
  return result;
}

}  // namespace omni
