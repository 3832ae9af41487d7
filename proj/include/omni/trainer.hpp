#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/classifier.hpp"
#include "omni/optimizer.hpp"
#include "omni/rng.hpp"
#include "omni/sampler.hpp"
#include "omni/teacher.hpp"
#include "omni/types.hpp"

namespace omni {

enum class MixupScope { kIntra, kCross };

std::string_view to_string(MixupScope scope);
MixupScope parse_mixup_scope(std::string_view text);

struct MixupConfig {
  bool enabled = false;
  MixupScope scope = MixupScope::kCross;
  double alpha = 0.2;  // lambda ~ Beta(alpha, alpha)

  void validate() const;
};

/// Model input with a label distribution over K classes.
struct Example {
  std::vector<double> x;
  std::vector<double> target;
};

/// Feature plus one-hot of the label (or pseudo-label). Throws if the sample
/// is unfeaturized, unlabeled or its class is outside [0, K).
Example make_example(const Sample& sample, std::size_t num_classes);

/// lambda * a + (1 - lambda) * b on both features and label vectors.
Example mixup_pair(const Example& a, const Example& b, double lambda);

struct JointLoss {
  double target = 0.0;     // summed cross-entropy over the target batch
  double auxiliary = 0.0;  // summed cross-entropy over the auxiliary batch
  double total = 0.0;      // target + auxiliary
  std::vector<double> gradient;  // d(total)/d(params)
};

JointLoss joint_loss(const ClassifierModel& model, std::span<const Example> target_batch,
                     std::span<const Example> auxiliary_batch);

/// Mixup pairing for one batch. partner[i] indexes the target batch (intra)
/// or the auxiliary batch (cross) and lambda[i] weights target member i.
struct MixPlan {
  MixupScope scope = MixupScope::kCross;
  std::vector<std::size_t> partner;
  std::vector<double> lambda;
};

/// Empty plan when mixup is off or a cross batch has no auxiliary half.
MixPlan plan_mixup(std::size_t target_size, std::size_t auxiliary_size, const MixupConfig& config,
                   RngStream& rng);

struct TrainRecord {
  int epoch = 0;
  double target_loss = 0.0;     // per-example mean
  double auxiliary_loss = 0.0;  // per-example mean, 0 without auxiliary examples
  double total_loss = 0.0;      // target_loss + auxiliary_loss
  double lr = 0.0;              // step size of the epoch's last update
  std::optional<double> val_top1;
  std::optional<double> val_top5;

  nlohmann::json to_json() const;
};

struct StudentResult {
  ClassifierModel model;
  std::vector<TrainRecord> records;
};

/// Joint SGD on target and auxiliary batches from BatchScheduler. The target
/// batch size is sampler.batch_target; optimizer.batch_size is not used.
/// With an empty auxiliary set and mixup off the result equals
/// train_classifier with batch_size = batch_target, bit for bit.
StudentResult train_student(const Manifest& target, const Manifest& auxiliary,
                            const OptimizerConfig& optimizer, const SamplerConfig& sampler,
                            const MixupConfig& mixup, const Manifest* validation, std::uint64_t seed,
                            const ModelSpec& spec = {});

}  // namespace omni
