#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "omni/error.hpp"
#include "omni/teacher.hpp"
#include "omni/trainer.hpp"
#include "test_support.hpp"

using namespace omni;

namespace {

ModelSpec small_spec(ModelKind kind = ModelKind::kLinearSoftmax) {
  ModelSpec spec;
  spec.kind = kind;
  spec.hidden = 6;
  spec.featurizer.grid = 2;  // 8-dim features
  return spec;
}

std::vector<Example> random_examples(std::size_t n, std::size_t d, std::size_t k, RngStream& rng, bool soft) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example e{test::random_vector(d, rng), one_hot(rng.index(k), k)};
    if (soft) e = mixup_pair(e, Example{e.x, one_hot(rng.index(k), k)}, rng.uniform());
    out.push_back(e);
  }
  return out;
}

/// Cross-entropy of a linear model by explicit loops over W[K x D], b[K].
double oracle_ce(const ClassifierModel& m, const Example& e) {
  const std::size_t k = m.num_classes();
  const std::size_t d = m.input_dims();
  std::vector<double> z(k);
  for (std::size_t c = 0; c < k; ++c) {
    z[c] = m.params()[k * d + c];
    for (std::size_t j = 0; j < d; ++j) z[c] += m.params()[c * d + j] * e.x[j];
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - zmax);
  const double lse = zmax + std::log(s);
  double ce = 0.0;
  for (std::size_t c = 0; c < k; ++c) ce -= e.target[c] * (z[c] - lse);
  return ce;
}

OptimizerConfig quick_optimizer(int epochs = 5) {
  OptimizerConfig cfg;
  cfg.epochs = epochs;
  cfg.lr_per_sample = 0.005;
  cfg.schedule = ScheduleKind::kCosine;
  return cfg;
}

SamplerConfig sampler_of(const std::string& ratio, std::size_t batch) {
  SamplerConfig s;
  s.ratio = BatchRatio::parse(ratio);
  s.batch_target = batch;
  return s;
}

}  // namespace

TEST_CASE("joint_loss matches a scalar cross-entropy oracle") {
  RngStream rng(101, "oracle");
  ClassifierModel model = ClassifierModel::linear(6, 4);
  for (double& p : model.params()) p = rng.normal();
  const auto target = random_examples(8, 6, 4, rng, false);
  const auto aux = random_examples(5, 6, 4, rng, true);

  double expect_target = 0.0;
  for (const auto& e : target) expect_target += oracle_ce(model, e);
  double expect_aux = 0.0;
  for (const auto& e : aux) expect_aux += oracle_ce(model, e);

  const JointLoss only_target = joint_loss(model, target, {});
  CHECK(std::abs(only_target.total - expect_target) < 1e-10);
  CHECK(only_target.auxiliary == 0.0);

  const JointLoss joint = joint_loss(model, target, aux);
  const JointLoss only_aux = joint_loss(model, {}, aux);
  CHECK(std::abs(joint.auxiliary - expect_aux) < 1e-10);
  CHECK(std::abs(joint.total - (only_target.total + only_aux.total)) < 1e-12);
  CHECK(joint.total == joint.target + joint.auxiliary);
  for (std::size_t i = 0; i < joint.gradient.size(); ++i) {
    CHECK(std::abs(joint.gradient[i] - (only_target.gradient[i] + only_aux.gradient[i])) < 1e-12);
  }
}

TEST_CASE("joint_loss is zero for a perfect model") {
  ClassifierModel model = ClassifierModel::linear(3, 3);
  for (std::size_t c = 0; c < 3; ++c) model.params()[c * 3 + c] = 1000.0;
  std::vector<Example> batch;
  for (std::size_t c = 0; c < 3; ++c) batch.push_back({one_hot(c, 3), one_hot(c, 3)});
  CHECK(std::abs(joint_loss(model, batch, batch).total) < 1e-9);
  std::vector<Example> wrong{{{1.0, 0.0}, one_hot(0, 3)}};
  CHECK_THROWS_AS(joint_loss(model, wrong, {}), ValidationError);
}

TEST_CASE("joint_loss gradient matches finite differences") {
  RngStream rng(102, "fd");
  for (bool soft : {false, true}) {
    for (ModelKind kind : {ModelKind::kLinearSoftmax, ModelKind::kMlp}) {
      ClassifierModel model = kind == ModelKind::kMlp ? ClassifierModel::mlp(5, 4, 3, rng) : ClassifierModel::linear(5, 3);
      for (double& p : model.params()) p = 0.6 * rng.normal();
      const auto target = random_examples(4, 5, 3, rng, soft);
      const auto aux = random_examples(3, 5, 3, rng, soft);
      const JointLoss jl = joint_loss(model, target, aux);
      const double h = 1e-5;
      for (std::size_t i = 0; i < model.param_count(); ++i) {
        const double saved = model.params()[i];
        model.params()[i] = saved + h;
        const double up = joint_loss(model, target, aux).total;
        model.params()[i] = saved - h;
        const double down = joint_loss(model, target, aux).total;
        model.params()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        CHECK(std::abs(numeric - jl.gradient[i]) / std::max(1e-8, std::abs(numeric) + std::abs(jl.gradient[i])) < 1e-4);
      }
    }
  }
}

TEST_CASE("mixup_pair endpoints and label linearity") {
  const Example a{{1.0, 2.0, 3.0}, one_hot(0, 3)};
  const Example b{{-1.0, 0.5, 0.0}, one_hot(2, 3)};
  const Example one = mixup_pair(a, b, 1.0);
  CHECK(one.x == a.x);
  CHECK(one.target == a.target);
  const Example half = mixup_pair(a, b, 0.5);
  CHECK(half.target == std::vector<double>{0.5, 0.0, 0.5});
  CHECK(half.x == std::vector<double>{0.0, 1.25, 1.5});
  CHECK_THROWS_AS(mixup_pair(a, Example{{1.0}, one_hot(0, 3)}, 0.5), ValidationError);
  CHECK_THROWS_AS(mixup_pair(a, b, 1.5), ValidationError);

  RngStream rng(103, "linearity");
  for (int trial = 0; trial < 20; ++trial) {
    ClassifierModel model = ClassifierModel::mlp(3, 5, 3, rng);
    const Example p{test::random_vector(3, rng), one_hot(rng.index(3), 3)};
    const Example q{test::random_vector(3, rng), one_hot(rng.index(3), 3)};
    const double lambda = rng.uniform();
    const Example mixed = mixup_pair(p, q, lambda);
    const double ce = model.loss(mixed.x, mixed.target);
    const double split = lambda * model.loss(mixed.x, p.target) + (1.0 - lambda) * model.loss(mixed.x, q.target);
    CHECK(std::abs(ce - split) < 1e-10);
  }
}

TEST_CASE("make_example uses the label or pseudo-label") {
  const Manifest target = test::feature_manifest({{0.5, 1.5}}, {1}, 3);
  const Example e = make_example(target.samples[0], 3);
  CHECK(e.x == std::vector<double>{0.5, 1.5});
  CHECK(e.target == one_hot(1, 3));
  const Manifest aux = test::feature_manifest({{0.0, 0.0}}, {2}, 3, ManifestRole::kAuxiliary);
  CHECK(make_example(aux.samples[0], 3).target == one_hot(2, 3));
  CHECK_THROWS_AS(make_example(aux.samples[0], 2), ValidationError);
}

TEST_CASE("Beta(0.2, 0.2) mixing weights are mostly near 0 or 1") {
  // Oracle: mass of Beta(0.2, 0.2) inside (0.1, 0.9) by composite Simpson.
  const double a = 0.2;
  const double norm = std::tgamma(a) * std::tgamma(a) / std::tgamma(2 * a);
  const int steps = 20000;
  const double lo = 0.1;
  const double hi = 0.9;
  const double h = (hi - lo) / steps;
  auto density = [&](double x) { return std::pow(x, a - 1) * std::pow(1 - x, a - 1) / norm; };
  double inside = density(lo) + density(hi);
  for (int i = 1; i < steps; ++i) inside += (i % 2 == 1 ? 4.0 : 2.0) * density(lo + i * h);
  inside *= h / 3.0;
  const double outside = 1.0 - inside;
  CHECK(outside >= 0.6);

  MixupConfig cfg;
  cfg.enabled = true;
  cfg.alpha = 0.2;
  cfg.scope = MixupScope::kCross;
  RngStream rng(104, "lambda");
  const std::size_t n = 10000;
  const MixPlan plan = plan_mixup(n, 7, cfg, rng);
  REQUIRE(plan.lambda.size() == n);
  std::size_t out_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(plan.partner[i] < 7);
    out_count += plan.lambda[i] <= 0.1 || plan.lambda[i] >= 0.9;
  }
  const double frac = static_cast<double>(out_count) / n;
  CHECK(frac >= 0.6);
  CHECK(std::abs(frac - outside) < 4.0 * std::sqrt(outside * (1 - outside) / n));
}

TEST_CASE("plan_mixup: intra pairs are a permutation, off or empty is no plan") {
  MixupConfig cfg;
  RngStream rng(105, "plan");
  CHECK(plan_mixup(8, 4, cfg, rng).partner.empty());
  cfg.enabled = true;
  CHECK(plan_mixup(8, 0, cfg, rng).partner.empty());
  cfg.scope = MixupScope::kIntra;
  const MixPlan p = plan_mixup(8, 0, cfg, rng);
  std::vector<std::size_t> sorted = p.partner;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 8; ++i) CHECK(sorted[i] == i);
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(parse_mixup_scope("intra") == MixupScope::kIntra);
}

TEST_CASE("train_student without auxiliary data equals train_classifier") {
  const Manifest target = test::gaussian_blobs(25, 3, 8, 3.0, 0.7, 106);
  Manifest empty_aux;
  empty_aux.role = ManifestRole::kAuxiliary;
  empty_aux.label_space = target.label_space;
  empty_aux.feature_dims = 8;
  for (ModelKind kind : {ModelKind::kLinearSoftmax, ModelKind::kMlp}) {
    OptimizerConfig opt = quick_optimizer(6);
    opt.warmup_epochs = 1;
    opt.batch_size = 16;
    const auto student = train_student(target, empty_aux, opt, sampler_of("2:1", 16), MixupConfig{}, nullptr, 9,
                                       small_spec(kind));
    const auto teacher = train_classifier(target, opt, 9, small_spec(kind));
    CHECK(student.model == teacher.model);
    REQUIRE(student.records.size() == teacher.epoch_losses.size());
    for (std::size_t e = 0; e < student.records.size(); ++e) {
      CHECK(student.records[e].target_loss == teacher.epoch_losses[e]);
      CHECK(student.records[e].auxiliary_loss == 0.0);
    }
  }
}

TEST_CASE("one SGD step on a single example") {
  const Manifest target = test::feature_manifest({{0.3, -1.2, 0.5, 2.0, 0.0, 1.0, -0.4, 0.7}}, {1}, 2);
  Manifest aux;
  aux.role = ManifestRole::kAuxiliary;
  aux.label_space = target.label_space;
  aux.feature_dims = 8;
  OptimizerConfig opt;
  opt.epochs = 1;
  opt.momentum = 0.0;
  opt.weight_decay = 0.0;
  opt.lr_per_sample = 0.05;
  opt.schedule = ScheduleKind::kStep;
  const auto r = train_student(target, aux, opt, sampler_of("2:1", 2), MixupConfig{}, nullptr, 1, small_spec());
  const ClassifierModel zero = ClassifierModel::linear(8, 2, small_spec().featurizer);
  std::vector<double> grad(zero.param_count(), 0.0);
  zero.accumulate_gradient(target.samples[0].feature->values, one_hot(1, 2), grad);
  for (std::size_t i = 0; i < grad.size(); ++i) CHECK(r.model.params()[i] == -0.05 * grad[i]);
}

TEST_CASE("train_student: records, determinism and auxiliary order") {
  const Manifest target = test::gaussian_blobs(20, 3, 8, 3.0, 0.8, 107);
  Manifest aux = test::gaussian_blobs(15, 3, 8, 3.0, 0.8, 108, ManifestRole::kAuxiliary);
  for (std::size_t i = 0; i < aux.size(); ++i) aux.samples[i].id = "aux" + std::to_string(i);
  const Manifest val = test::gaussian_blobs(10, 3, 8, 3.0, 0.8, 109, ManifestRole::kValidation);
  const OptimizerConfig opt = quick_optimizer(4);
  const SamplerConfig sampler = sampler_of("2:1", 8);

  const auto a = train_student(target, aux, opt, sampler, MixupConfig{}, &val, 5, small_spec());
  const auto b = train_student(target, aux, opt, sampler, MixupConfig{}, &val, 5, small_spec());
  CHECK(a.model == b.model);
  REQUIRE(a.records.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(a.records[e].val_top1 == b.records[e].val_top1);
    CHECK(a.records[e].total_loss == a.records[e].target_loss + a.records[e].auxiliary_loss);
    CHECK(a.records[e].auxiliary_loss > 0.0);
    CHECK(a.records[e].val_top1.has_value());
    CHECK(std::isfinite(a.records[e].total_loss));
  }

  // Interleave classes differently while keeping each class's internal
  // order: the schedule only sees class counts, so the model is unchanged.
  Manifest interleaved = aux;
  std::stable_sort(interleaved.samples.begin(), interleaved.samples.end(), [](const Sample& x, const Sample& y) {
    return *x.pseudo_label > *y.pseudo_label;
  });
  REQUIRE_FALSE(interleaved.samples == aux.samples);
  const auto c = train_student(target, interleaved, opt, sampler, MixupConfig{}, &val, 5, small_spec());
  CHECK(c.model == a.model);

  const auto other_seed = train_student(target, aux, opt, sampler, MixupConfig{}, &val, 6, small_spec());
  CHECK_FALSE(other_seed.model == a.model);
}

TEST_CASE("train_student with mixup is seeded and finite") {
  const Manifest target = test::gaussian_blobs(20, 2, 8, 3.0, 0.8, 110);
  const Manifest aux = test::gaussian_blobs(20, 2, 8, 3.0, 0.8, 111, ManifestRole::kAuxiliary);
  for (MixupScope scope : {MixupScope::kIntra, MixupScope::kCross}) {
    MixupConfig mix;
    mix.enabled = true;
    mix.scope = scope;
    const auto a = train_student(target, aux, quick_optimizer(3), sampler_of("1:1", 8), mix, nullptr, 3, small_spec());
    const auto b = train_student(target, aux, quick_optimizer(3), sampler_of("1:1", 8), mix, nullptr, 3, small_spec());
    CHECK(a.model == b.model);
    for (const auto& r : a.records) CHECK(std::isfinite(r.total_loss));
    const auto plain = train_student(target, aux, quick_optimizer(3), sampler_of("1:1", 8), MixupConfig{}, nullptr, 3,
                                     small_spec());
    CHECK_FALSE(plain.model == a.model);
  }
}

TEST_CASE("train_student errors") {
  const Manifest target = test::gaussian_blobs(10, 2, 8, 3.0, 0.5, 112);
  Manifest aux = test::gaussian_blobs(5, 3, 8, 3.0, 0.5, 113, ManifestRole::kAuxiliary);
  CHECK_THROWS_AS(train_student(target, aux, quick_optimizer(), sampler_of("2:1", 8), MixupConfig{}, nullptr, 1,
                                small_spec()),
                  ValidationError);  // label spaces differ

  Manifest huge = target;
  for (auto& s : huge.samples) {
    for (double& v : s.feature->values) v *= 1e150;
  }
  Manifest none;
  none.role = ManifestRole::kAuxiliary;
  none.label_space = target.label_space;
  OptimizerConfig opt = quick_optimizer(3);
  opt.lr_per_sample = 1e200;
  try {
    train_student(huge, none, opt, sampler_of("2:1", 4), MixupConfig{}, nullptr, 1, small_spec());
    FAIL("expected a non-finite loss");
  } catch (const RuntimeError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}
