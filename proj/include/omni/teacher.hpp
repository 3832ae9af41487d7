#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "omni/classifier.hpp"
#include "omni/optimizer.hpp"
#include "omni/types.hpp"

namespace omni {

/// Architecture of a classifier to be trained.
struct ModelSpec {
  ModelKind kind = ModelKind::kLinearSoftmax;
  std::size_t hidden = 32;
  FeaturizerConfig featurizer;
};

struct TrainedClassifier {
  ClassifierModel model;
  /// Mean per-sample cross-entropy of the last epoch (of the initial model
  /// when epochs = 0).
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

/// Model before any update. Linear models start at zero; MLP weights are
/// drawn from stream (seed, "init").
ClassifierModel initial_model(const ModelSpec& spec, std::size_t input_dims,
                              std::size_t num_classes, std::uint64_t seed);

/// Number of mini-batches one pass over n samples produces.
inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch) {
  return (n + batch - 1) / batch;
}

/// One SGD update from a gradient summed over `count` examples. Returns the
/// step size used.
double apply_update(ClassifierModel& model, SgdMomentum& optimizer, const OptimizerConfig& config,
                    std::span<const double> grad_sum, std::size_t count, double progress);

/// Supervised training on a labeled, featurized target manifest by
/// mini-batch SGD on mean cross-entropy. Deterministic given the seed.
TrainedClassifier train_classifier(const Manifest& train, const OptimizerConfig& config,
                                   std::uint64_t seed, const ModelSpec& spec = {});

}  // namespace omni
