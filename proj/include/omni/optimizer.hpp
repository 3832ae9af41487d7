#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace omni {

enum class ScheduleKind { kStep, kCosine };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

/// SGD hyper-parameters. The learning rate is given per sample: one update
/// on a batch of B examples uses lr_per_sample * B times the schedule
/// factor, applied to the batch-mean gradient.
struct OptimizerConfig {
  double lr_per_sample = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ScheduleKind schedule = ScheduleKind::kStep;
  std::vector<double> milestones;  // epochs, step schedule only
  double factor = 0.1;             // step decay multiplier
  int warmup_epochs = 0;
  int epochs = 20;
  std::size_t batch_size = 32;

  void validate() const;
};

/// Multiplier on the base rate at fractional epoch `progress`. Linear warmup
/// from 0 over the first warmup_epochs, then step decay at each milestone
/// already passed, or a half-cosine over the remaining epochs.
double schedule_factor(const OptimizerConfig& config, double progress);

/// Effective step size for a batch of `batch` samples at `progress`.
double learning_rate(const OptimizerConfig& config, double progress, std::size_t batch);

/// Heavy-ball SGD with coupled L2 weight decay:
///   v <- momentum * v + (g + wd * w);  w <- w - lr * v
class SgdMomentum {
 public:
  explicit SgdMomentum(std::size_t param_count) : velocity_(param_count, 0.0) {}

  void step(std::span<double> params, std::span<const double> mean_grad, double lr,
            double momentum, double weight_decay);

  std::span<const double> velocity() const { return velocity_; }

 private:
  std::vector<double> velocity_;
};

}  // namespace omni
