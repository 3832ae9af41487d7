#include "omni/teacher.hpp"

#include <cmath>
#include <string>

#include "omni/error.hpp"
#include "omni/rng.hpp"

namespace omni {

ClassifierModel initial_model(const ModelSpec& spec, std::size_t input_dims,
                              std::size_t num_classes, std::uint64_t seed) {
  if (spec.kind == ModelKind::kLinearSoftmax) {
    return ClassifierModel::linear(input_dims, num_classes, spec.featurizer);
  }
  RngStream rng(seed, "init");
  return ClassifierModel::mlp(input_dims, spec.hidden, num_classes, rng, spec.featurizer);
}

double apply_update(ClassifierModel& model, SgdMomentum& optimizer, const OptimizerConfig& config,
                    std::span<const double> grad_sum, std::size_t count, double progress) {
  std::vector<double> mean(grad_sum.size());
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = grad_sum[i] * inv;
  const double lr = learning_rate(config, progress, count);
  optimizer.step(model.params(), mean, lr, config.momentum, config.weight_decay);
  return lr;
}

TrainedClassifier train_classifier(const Manifest& train, const OptimizerConfig& config,
                                   std::uint64_t seed, const ModelSpec& spec) {
  config.validate();
  if (train.role != ManifestRole::kTarget) {
    throw ValidationError("train_classifier expects a target manifest");
  }
  if (train.empty()) throw ValidationError("train_classifier: empty training set");
  const std::size_t k = train.label_space.size();
  if (k < 2) throw ValidationError("train_classifier: K must be >= 2");
  for (const auto& s : train.samples) {
    if (!s.label) throw ValidationError("train_classifier: sample '" + s.id + "' is unlabeled");
    if (!s.feature) throw ValidationError("train_classifier: sample '" + s.id + "' not featurized");
  }
  if (train.feature_dims != spec.featurizer.dims()) {
    throw ValidationError("train_classifier: manifest feature_dims " +
                          std::to_string(train.feature_dims) + " != featurizer dims " +
                          std::to_string(spec.featurizer.dims()));
  }

  TrainedClassifier out{initial_model(spec, train.feature_dims, k, seed), 0.0, {}};
  ClassifierModel& model = out.model;
  SgdMomentum optimizer(model.param_count());
  const std::size_t n = train.size();
  const std::size_t nb = batches_per_epoch(n, config.batch_size);
  std::vector<double> grad(model.param_count());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_permutation(n, seed, static_cast<std::size_t>(epoch));
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const Sample& s = train.samples[order[i]];
        batch_loss += model.accumulate_gradient(s.feature->values,
                                                one_hot(static_cast<std::size_t>(*s.label), k), grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw RuntimeError("train_classifier: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
      }
      epoch_loss += batch_loss;
      const double progress = epoch + static_cast<double>(b) / static_cast<double>(nb);
      apply_update(model, optimizer, config, grad, end - begin, progress);
    }
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }

  if (out.epoch_losses.empty()) {
    double total = 0.0;
    for (const auto& s : train.samples) {
      total += model.loss(s.feature->values, one_hot(static_cast<std::size_t>(*s.label), k));
    }
    out.final_loss = total / static_cast<double>(n);
  } else {
    out.final_loss = out.epoch_losses.back();
  }
  return out;
}

}  // namespace omni
