#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "omni/featurize.hpp"
#include "omni/rng.hpp"
#include "omni/types.hpp"

namespace omni {

enum class ModelKind { kLinearSoftmax, kMlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Softmax classifier over feature vectors: either linear (W x + b) or one
/// tanh hidden layer. Parameters live in a single flat vector so the
/// optimizer treats both kinds the same way.
///
/// Linear layout: W[K x D] row-major, b[K].
/// MLP layout:    W1[H x D], b1[H], W2[K x H], b2[K].
class ClassifierModel {
 public:
  ClassifierModel() = default;

  /// Zero-initialised linear model.
  static ClassifierModel linear(std::size_t input_dims, std::size_t num_classes,
                                FeaturizerConfig featurizer = {});
  /// Hidden and output weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
  /// biases zero.
  static ClassifierModel mlp(std::size_t input_dims, std::size_t hidden, std::size_t num_classes,
                             RngStream& rng, FeaturizerConfig featurizer = {});

  ModelKind kind() const { return kind_; }
  std::size_t input_dims() const { return input_dims_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t num_classes() const { return num_classes_; }
  const FeaturizerConfig& featurizer() const { return featurizer_; }
  Consensus consensus() const { return featurizer_.consensus; }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::vector<double> logits(std::span<const double> x) const;

  /// Adds d(CE)/d(params) for one example to `grad` and returns the example's
  /// cross-entropy -sum_k t_k log p_k. `target` is a probability vector (a
  /// one-hot row for hard labels, a mixed row for mixup).
  double accumulate_gradient(std::span<const double> x, std::span<const double> target,
                             std::span<double> grad) const;

  /// Cross-entropy only, no gradient.
  double loss(std::span<const double> x, std::span<const double> target) const;

  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

  bool operator==(const ClassifierModel&) const = default;

 private:
  ClassifierModel(ModelKind kind, std::size_t input_dims, std::size_t hidden,
                  std::size_t num_classes, FeaturizerConfig featurizer);

  void check_input(std::span<const double> x) const;
  void hidden_activations(std::span<const double> x, std::vector<double>& h) const;

  ModelKind kind_ = ModelKind::kLinearSoftmax;
  std::size_t input_dims_ = 0;
  std::size_t hidden_ = 0;
  std::size_t num_classes_ = 0;
  FeaturizerConfig featurizer_;
  std::vector<double> params_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

std::vector<double> one_hot(std::size_t cls, std::size_t num_classes);

std::vector<double> predict_proba(const ClassifierModel& model, const FeatureVector& feature);
/// Uses the sample's stored feature when present (dims must match the
/// model), otherwise featurizes the frames with the model's featurizer.
std::vector<double> predict_proba(const ClassifierModel& model, const Sample& sample);

/// Arithmetic mean of member probability vectors.
std::vector<double> ensemble_proba(std::span<const ClassifierModel> models, const Sample& sample);
std::vector<double> ensemble_proba(std::span<const ClassifierModel> models,
                                   const FeatureVector& feature);

}  // namespace omni
