#include "omni/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "omni/error.hpp"

namespace omni {

std::string_view to_string(ScheduleKind kind) { return kind == ScheduleKind::kCosine ? "cosine" : "step"; }

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "step") return ScheduleKind::kStep;
  if (text == "cosine") return ScheduleKind::kCosine;
  throw ValidationError("unknown schedule '" + std::string(text) + "'");
}

void OptimizerConfig::validate() const {
  if (!(lr_per_sample > 0.0)) throw ValidationError("optimizer: lr_per_sample must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("optimizer: momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("optimizer: weight_decay must be >= 0");
  if (!(factor > 0.0 && factor < 1.0)) throw ValidationError("optimizer: factor must be in (0,1)");
  if (epochs < 0) throw ValidationError("optimizer: epochs must be >= 0");
  if (warmup_epochs < 0) throw ValidationError("optimizer: warmup_epochs must be >= 0");
  if (warmup_epochs > 0 && warmup_epochs >= epochs) {
    throw ValidationError("optimizer: warmup_epochs must be < epochs");
  }
  if (batch_size == 0) throw ValidationError("optimizer: batch_size must be >= 1");
}

double schedule_factor(const OptimizerConfig& config, double progress) {
  const double warm = static_cast<double>(config.warmup_epochs);
  if (config.warmup_epochs > 0 && progress < warm) return progress / warm;
  if (config.schedule == ScheduleKind::kStep) {
    double f = 1.0;
    for (double m : config.milestones) {
      if (progress >= m) f *= config.factor;
    }
    return f;
  }
  const double span = static_cast<double>(config.epochs) - warm;
  if (span <= 0.0) return 1.0;
  const double t = std::min(1.0, std::max(0.0, (progress - warm) / span));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double learning_rate(const OptimizerConfig& config, double progress, std::size_t batch) {
  return schedule_factor(config, progress) * config.lr_per_sample * static_cast<double>(batch);
}

void SgdMomentum::step(std::span<double> params, std::span<const double> mean_grad, double lr,
                       double momentum, double weight_decay) {
  if (params.size() != velocity_.size() || mean_grad.size() != velocity_.size()) {
    throw ValidationError("optimizer state size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum * velocity_[i] + (mean_grad[i] + weight_decay * params[i]);
    params[i] -= lr * velocity_[i];
  }
}

}  // namespace omni
