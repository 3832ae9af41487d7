#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/featurize.hpp"
#include "omni/types.hpp"

namespace omni {

/// Affine map x -> matrix * (x - mean) that decorrelates a feature set and
/// scales it to unit variance (ZCA form, so dimensions keep their meaning).
struct WhiteningTransform {
  std::vector<double> mean;
  std::vector<double> matrix;  // dims x dims, row-major
  std::size_t floored_eigenvalues = 0;

  std::size_t dims() const { return mean.size(); }
  std::vector<double> apply(std::span<const double> x) const;
  /// Identity transform (used when whitening is disabled).
  static WhiteningTransform identity(std::size_t dims);
};

struct WhitenResult {
  std::vector<FeatureVector> features;
  WhiteningTransform transform;
};

/// Default eigenvalue floor relative to the largest eigenvalue.
inline constexpr double kWhitenRidge = 1e-9;

/// Fits on `features` (covariance normalised by 1/n) and returns them
/// whitened. Eigenvalues below ridge * lambda_max are raised to that floor.
WhitenResult whiten(std::span<const FeatureVector> features, double ridge = kWhitenRidge);
WhiteningTransform fit_whitening(std::span<const FeatureVector> features,
                                 double ridge = kWhitenRidge);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

enum class WhitenFit { kUnion, kReferences };

struct DedupConfig {
  int crops_per_frame = 4;
  double crop_min_ratio = 0.75;
  double crop_max_ratio = 0.95;
  bool whiten = true;
  WhitenFit fit = WhitenFit::kUnion;
  double ridge = kWhitenRidge;
  std::optional<double> threshold_override;
  /// Reference frames used to derive the automatic threshold.
  std::size_t threshold_frames = 64;
  FeaturizerConfig featurizer;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean cosine similarity between random crops of the same frame, averaged
/// over frames. Crops are computed in the space given by `transform`; when
/// null and whitening is enabled, a transform is fitted on the crops.
double derive_threshold(std::span<const Frame> frames, const DedupConfig& config,
                        const WhiteningTransform* transform = nullptr);

struct DedupPair {
  std::string web_id;
  std::string reference_id;
  double similarity = 0.0;
};

struct DedupReport {
  std::vector<DedupPair> pairs;
  double threshold = 0.0;
  bool threshold_derived = false;
  std::size_t pool_size = 0;
  std::size_t flagged = 0;

  nlohmann::json to_json() const;
};

struct DedupResult {
  Manifest clean;
  DedupReport report;
};

/// Removes pool samples whose similarity to any reference reaches the
/// threshold. Samples are compared through their stored features, or
/// segment-average features of their frames when none are stored.
DedupResult dedup_pool(const Manifest& pool, const Manifest& references, const DedupConfig& config);

}  // namespace omni
