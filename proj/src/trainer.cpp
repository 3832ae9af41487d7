#include "omni/trainer.hpp"

#include <cmath>
#include <string>

#include "omni/error.hpp"
#include "omni/eval.hpp"

namespace omni {

std::string_view to_string(MixupScope scope) {
  return scope == MixupScope::kIntra ? "intra" : "cross";
}

MixupScope parse_mixup_scope(std::string_view text) {
  if (text == "intra") return MixupScope::kIntra;
  if (text == "cross") return MixupScope::kCross;
  throw ValidationError("unknown mixup scope '" + std::string(text) + "'");
}

void MixupConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("mixup: alpha must be > 0");
}

Example make_example(const Sample& sample, std::size_t num_classes) {
  if (!sample.feature) throw ValidationError("sample '" + sample.id + "' is not featurized");
  const auto y = sample.effective_label();
  if (!y) throw ValidationError("sample '" + sample.id + "' has neither label nor pseudo-label");
  if (*y < 0 || static_cast<std::size_t>(*y) >= num_classes) {
    throw ValidationError("sample '" + sample.id + "' label " + std::to_string(*y) + " outside [0, " +
                          std::to_string(num_classes) + ")");
  }
  return {sample.feature->values, one_hot(static_cast<std::size_t>(*y), num_classes)};
}

Example mixup_pair(const Example& a, const Example& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("mixup: lambda must be in [0,1]");
  if (a.x.size() != b.x.size()) throw ValidationError("mixup: feature dims mismatch");
  if (a.target.size() != b.target.size()) throw ValidationError("mixup: class count mismatch");
  Example out;
  out.x.resize(a.x.size());
  out.target.resize(a.target.size());
  const double mu = 1.0 - lambda;
  for (std::size_t i = 0; i < a.x.size(); ++i) out.x[i] = lambda * a.x[i] + mu * b.x[i];
  for (std::size_t i = 0; i < a.target.size(); ++i) out.target[i] = lambda * a.target[i] + mu * b.target[i];
  return out;
}

JointLoss joint_loss(const ClassifierModel& model, std::span<const Example> target_batch,
                     std::span<const Example> auxiliary_batch) {
  JointLoss out;
  out.gradient.assign(model.param_count(), 0.0);
  for (const auto& e : target_batch) {
    if (e.target.size() != model.num_classes()) throw ValidationError("joint_loss: label vector size != K");
    out.target += model.accumulate_gradient(e.x, e.target, out.gradient);
  }
  for (const auto& e : auxiliary_batch) {
    if (e.target.size() != model.num_classes()) throw ValidationError("joint_loss: label vector size != K");
    out.auxiliary += model.accumulate_gradient(e.x, e.target, out.gradient);
  }
  out.total = out.target + out.auxiliary;
  return out;
}

MixPlan plan_mixup(std::size_t target_size, std::size_t auxiliary_size, const MixupConfig& config,
                   RngStream& rng) {
  MixPlan plan;
  plan.scope = config.scope;
  if (!config.enabled || target_size == 0) return plan;
  if (config.scope == MixupScope::kCross && auxiliary_size == 0) return plan;
  if (config.scope == MixupScope::kIntra) {
    plan.partner.resize(target_size);
    for (std::size_t i = 0; i < target_size; ++i) plan.partner[i] = i;
    rng.shuffle(plan.partner);
  } else {
    plan.partner.reserve(target_size);
    for (std::size_t i = 0; i < target_size; ++i) plan.partner.push_back(rng.index(auxiliary_size));
  }
  plan.lambda.reserve(target_size);
  for (std::size_t i = 0; i < target_size; ++i) plan.lambda.push_back(rng.beta(config.alpha, config.alpha));
  return plan;
}

nlohmann::json TrainRecord::to_json() const {
  nlohmann::json j{{"epoch", epoch}, {"target_loss", target_loss}, {"auxiliary_loss", auxiliary_loss},
                   {"total_loss", total_loss}, {"lr", lr}};
  j["val_top1"] = val_top1 ? nlohmann::json(*val_top1) : nlohmann::json(nullptr);
  j["val_top5"] = val_top5 ? nlohmann::json(*val_top5) : nlohmann::json(nullptr);
  return j;
}

namespace {

void check_inputs(const Manifest& target, const Manifest& auxiliary, const ModelSpec& spec) {
  if (target.role != ManifestRole::kTarget) throw ValidationError("train_student expects a target manifest");
  if (target.empty()) throw ValidationError("train_student: empty target set");
  if (target.feature_dims != spec.featurizer.dims()) {
    throw ValidationError("train_student: target feature_dims " + std::to_string(target.feature_dims) +
                          " != featurizer dims " + std::to_string(spec.featurizer.dims()));
  }
  for (const auto& s : target.samples) {
    if (!s.label) throw ValidationError("train_student: target sample '" + s.id + "' is unlabeled");
  }
  if (auxiliary.empty()) return;
  if (auxiliary.role != ManifestRole::kAuxiliary) throw ValidationError("train_student expects an auxiliary manifest");
  if (auxiliary.label_space != target.label_space) {
    throw ValidationError("train_student: auxiliary label space differs from target");
  }
  if (auxiliary.feature_dims != target.feature_dims) {
    throw ValidationError("train_student: auxiliary feature_dims " + std::to_string(auxiliary.feature_dims) +
                          " != target " + std::to_string(target.feature_dims));
  }
}

}  // namespace

StudentResult train_student(const Manifest& target, const Manifest& auxiliary,
                            const OptimizerConfig& optimizer, const SamplerConfig& sampler,
                            const MixupConfig& mixup, const Manifest* validation, std::uint64_t seed,
                            const ModelSpec& spec) {
  optimizer.validate();
  sampler.validate();
  mixup.validate();
  check_inputs(target, auxiliary, spec);
  const std::size_t k = target.label_space.size();

  std::vector<Example> target_examples;
  target_examples.reserve(target.size());
  for (const auto& s : target.samples) target_examples.push_back(make_example(s, k));
  std::vector<Example> aux_examples;
  aux_examples.reserve(auxiliary.size());
  for (const auto& s : auxiliary.samples) aux_examples.push_back(make_example(s, k));

  StudentResult out{initial_model(spec, target.feature_dims, k, seed), {}};
  ClassifierModel& model = out.model;
  SgdMomentum sgd(model.param_count());
  const BatchScheduler scheduler(target, auxiliary, sampler, seed);
  const std::size_t nb = scheduler.batches_per_epoch();
  std::vector<double> grad(model.param_count());

  for (int epoch = 0; epoch < optimizer.epochs; ++epoch) {
    const auto plans = scheduler.epoch_plans(static_cast<std::size_t>(epoch));
    RngStream mix_rng(seed, "mixup/" + std::to_string(epoch));
    double target_sum = 0.0;
    double aux_sum = 0.0;
    std::size_t target_count = 0;
    std::size_t aux_count = 0;
    TrainRecord record;
    record.epoch = epoch;

    for (std::size_t b = 0; b < nb; ++b) {
      const BatchPlan& plan = plans[b];
      std::fill(grad.begin(), grad.end(), 0.0);
      const MixPlan mix = plan_mixup(plan.target.size(), plan.auxiliary.size(), mixup, mix_rng);
      std::vector<bool> aux_consumed(plan.auxiliary.size(), false);

      double batch_target = 0.0;
      for (std::size_t i = 0; i < plan.target.size(); ++i) {
        const Example& a = target_examples[plan.target[i]];
        if (mix.partner.empty()) {
          batch_target += model.accumulate_gradient(a.x, a.target, grad);
          continue;
        }
        const std::size_t p = mix.partner[i];
        const Example& partner = mix.scope == MixupScope::kIntra ? target_examples[plan.target[p]]
                                                                 : aux_examples[plan.auxiliary[p]];
        if (mix.scope == MixupScope::kCross) aux_consumed[p] = true;
        const Example mixed = mixup_pair(a, partner, mix.lambda[i]);
        batch_target += model.accumulate_gradient(mixed.x, mixed.target, grad);
      }
      double batch_aux = 0.0;
      std::size_t batch_aux_count = 0;
      for (std::size_t j = 0; j < plan.auxiliary.size(); ++j) {
        if (aux_consumed[j]) continue;
        const Example& e = aux_examples[plan.auxiliary[j]];
        batch_aux += model.accumulate_gradient(e.x, e.target, grad);
        ++batch_aux_count;
      }
      if (!std::isfinite(batch_target + batch_aux)) {
        throw RuntimeError("train_student: non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                           std::to_string(plan.iteration) + " (target " + std::to_string(batch_target) +
                           ", auxiliary " + std::to_string(batch_aux) + ")");
      }
      target_sum += batch_target;
      aux_sum += batch_aux;
      target_count += plan.target.size();
      aux_count += batch_aux_count;
      const double progress = epoch + static_cast<double>(b) / static_cast<double>(nb);
      record.lr = apply_update(model, sgd, optimizer, grad, plan.target.size() + batch_aux_count, progress);
    }

    record.target_loss = target_sum / static_cast<double>(target_count);
    record.auxiliary_loss = aux_count == 0 ? 0.0 : aux_sum / static_cast<double>(aux_count);
    record.total_loss = record.target_loss + record.auxiliary_loss;
    if (validation != nullptr && !validation->empty()) {
      const Evaluation ev = evaluate(model, *validation);
      record.val_top1 = ev.top1;
      record.val_top5 = ev.top5;
    }
    out.records.push_back(record);
  }
  return out;
}

}  // namespace omni
