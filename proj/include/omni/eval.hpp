#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/classifier.hpp"
#include "omni/types.hpp"

namespace omni {

/// n(i, j) = samples of true class i predicted as j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes);
  /// Row-major K*K counts.
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts_[i * k_ + j]; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);

  std::uint64_t row_sum(std::size_t i) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const;

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  nlohmann::json to_json() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// True iff `cls` ranks among the k largest entries, ties going to the
/// lower class index.
bool in_top_k(std::span<const double> probs, std::size_t cls, std::size_t k);

/// Requires every sample to carry a ground-truth label and 1 <= k <= K.
double top_k_accuracy(const ClassifierModel& model, const Manifest& manifest, std::size_t k);

ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Manifest& manifest);

struct Evaluation {
  double top1 = 0.0;
  double top5 = 0.0;  // top-min(5, K)
  ConfusionMatrix matrix;
};

/// All metrics from one pass of predictions.
Evaluation evaluate(const ClassifierModel& model, const Manifest& manifest);

/// (n_ij + n_ji) / (n_ij + n_ji + n_ii + n_jj); nullopt when the
/// denominator is zero.
std::optional<double> confusion_score(std::uint64_t n_ij, std::uint64_t n_ji, std::uint64_t n_ii,
                                      std::uint64_t n_jj);
std::optional<double> confusion_score(const ConfusionMatrix& m, std::size_t i, std::size_t j);

struct PairScore {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
};

/// Defined scores for all pairs i < j, most confused first.
std::vector<PairScore> confusion_pairs(const ConfusionMatrix& m);

struct PairDelta {
  std::size_t i = 0;
  std::size_t j = 0;
  double omni_score = 0.0;
  double base_score = 0.0;
  double delta = 0.0;  // omni - base; negative is an improvement
};

struct ConfusionReport {
  std::string omni_id;
  std::string base_id;
  /// Pairs defined in both matrices, by delta ascending then (i, j).
  std::vector<PairDelta> pairs;

  std::vector<PairDelta> most_improved(std::size_t n = 5) const;
  std::vector<PairDelta> most_regressed(std::size_t n = 2) const;
  nlohmann::json to_json(const std::vector<std::string>& class_names = {}) const;
};

ConfusionReport confusion_delta(const ConfusionMatrix& omni, const ConfusionMatrix& base,
                                std::string omni_id = "omni", std::string base_id = "baseline");

}  // namespace omni
