#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "omni/error.hpp"
#include "omni/sampler.hpp"
#include "test_support.hpp"

using namespace omni;

namespace {

/// Auxiliary manifest with counts[c] samples of pseudo-class c.
Manifest aux_with_counts(const std::vector<std::size_t>& counts) {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      xs.push_back({static_cast<double>(c), static_cast<double>(i)});
      ys.push_back(static_cast<int>(c));
    }
  }
  return test::feature_manifest(xs, ys, counts.size(), ManifestRole::kAuxiliary);
}

Manifest target_of(std::size_t n) {
  std::vector<std::vector<double>> xs(n, std::vector<double>{0.0, 0.0});
  std::vector<int> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = static_cast<int>(i % 2);
  return test::feature_manifest(xs, ys, 2);
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("class_weights: worked values") {
  const std::vector<std::size_t> skewed{100, 1};
  const auto p02 = class_weights(skewed, ResampleStrategy::power(0.2));
  // 100^0.2 = 2.51189 computed independently of the library.
  const double big = std::exp(0.2 * std::log(100.0));
  CHECK(big == doctest::Approx(2.51189).epsilon(1e-5));
  CHECK(std::abs(p02[0] - 0.71525) < 1e-4);
  CHECK(std::abs(p02[1] - 0.28475) < 1e-4);
  CHECK(p02[0] == doctest::Approx(big / (big + 1.0)).epsilon(1e-12));

  const auto p1 = class_weights(skewed, ResampleStrategy::power(1.0));
  CHECK(p1[0] == doctest::Approx(100.0 / 101.0).epsilon(1e-12));
  CHECK(class_weights(skewed, ResampleStrategy::none()) == p1);

  // p -> 0 flattens every non-empty class to the same weight.
  const auto tiny = class_weights(std::vector<std::size_t>{100, 1, 0}, ResampleStrategy::power(1e-9));
  CHECK(tiny[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(tiny[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(tiny[2] == 0.0);

  const auto clipped = class_weights(std::vector<std::size_t>{6000, 3000}, ResampleStrategy::clipped(5000));
  CHECK(clipped[0] == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(clipped[1] == doctest::Approx(0.375).epsilon(1e-12));

  CHECK_THROWS_AS(class_weights(std::vector<std::size_t>{0, 0}, ResampleStrategy::none()), ValidationError);
  CHECK_THROWS_AS(ResampleStrategy::power(0.0).validate(), ValidationError);
  CHECK_THROWS_AS(ResampleStrategy::power(1.5).validate(), ValidationError);
  CHECK_THROWS_AS(ResampleStrategy::clipped(0.5).validate(), ValidationError);
}

TEST_CASE("class_weights: normalisation, scale invariance and power monotonicity") {
  RngStream rng(91, "weights");
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::size_t> counts(2 + rng.index(6));
    for (auto& c : counts) c = rng.index(500);
    counts[rng.index(counts.size())] += 1;
    std::vector<std::size_t> scaled(counts);
    const std::size_t factor = 1 + rng.index(9);
    for (auto& c : scaled) c *= factor;
    for (const auto& s : {ResampleStrategy::none(), ResampleStrategy::power(0.2), ResampleStrategy::power(0.7),
                          ResampleStrategy::clipped(100)}) {
      const auto w = class_weights(counts, s);
      CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) CHECK(w[c] == 0.0);
      }
      if (s.kind != ResampleKind::kClipped) {
        const auto ws = class_weights(scaled, s);
        for (std::size_t c = 0; c < w.size(); ++c) CHECK(std::abs(w[c] - ws[c]) < 1e-12);
      }
    }
  }

  const std::vector<std::size_t> counts{400, 90, 7};
  double previous = std::numeric_limits<double>::infinity();
  for (double p : {0.9, 0.7, 0.5, 0.3, 0.2, 0.1}) {
    const auto w = class_weights(counts, ResampleStrategy::power(p));
    const double ratio = w[0] / w[2];
    CHECK(ratio < previous);
    previous = ratio;
  }
}

TEST_CASE("draw_auxiliary: empirical class frequencies") {
  const std::vector<std::size_t> counts{500, 120, 30, 5, 0};
  const Manifest aux = aux_with_counts(counts);
  for (const auto& s : {ResampleStrategy::power(0.2), ResampleStrategy::none(), ResampleStrategy::clipped(60)}) {
    RngStream rng(92, "draws");
    const std::size_t n = 100000;
    const auto idx = draw_auxiliary(aux, s, n, rng);
    std::vector<double> freq(counts.size(), 0.0);
    for (auto i : idx) {
      REQUIRE(i < aux.size());
      freq[static_cast<std::size_t>(*aux.samples[i].pseudo_label)] += 1.0 / n;
    }
    CHECK(total_variation(freq, class_weights(counts, s)) < 0.01);
    CHECK(freq[4] == 0.0);
  }
}

TEST_CASE("draw_auxiliary: degenerate and balanced pools") {
  const Manifest single = aux_with_counts({0, 7, 0});
  RngStream rng(93, "single");
  for (auto i : draw_auxiliary(single, ResampleStrategy::power(0.2), 500, rng)) {
    CHECK(*single.samples[i].pseudo_label == 1);
  }

  const Manifest balanced = aux_with_counts({40, 40, 40, 40});
  const std::size_t n = 100000;
  const auto idx = draw_auxiliary(balanced, ResampleStrategy::none(), n, rng);
  std::vector<double> freq(4, 0.0);
  std::vector<std::size_t> member_hits(balanced.size(), 0);
  for (auto i : idx) {
    freq[static_cast<std::size_t>(*balanced.samples[i].pseudo_label)] += 1.0 / n;
    ++member_hits[i];
  }
  for (double f : freq) CHECK(std::abs(f - 0.25) < 0.01);
  // Within a class members are uniform: each of 160 members near n/160.
  for (auto h : member_hits) CHECK(std::abs(static_cast<double>(h) - n / 160.0) < 5 * std::sqrt(n / 160.0));

  RngStream a(94, "same");
  RngStream b(94, "same");
  CHECK(draw_auxiliary(balanced, ResampleStrategy::power(0.2), 50, a) ==
        draw_auxiliary(balanced, ResampleStrategy::power(0.2), 50, b));
  Manifest empty = balanced;
  empty.samples.clear();
  CHECK_THROWS_AS(draw_auxiliary(empty, ResampleStrategy::none(), 1, a), ValidationError);
}

TEST_CASE("batch ratio parsing and config validation") {
  const auto r = BatchRatio::parse("2:1");
  CHECK(r.target == 2);
  CHECK(r.auxiliary == 1);
  CHECK(r.to_string() == "2:1");
  CHECK(BatchRatio::parse("2:3").auxiliary == 3);
  CHECK_THROWS_AS(BatchRatio::parse("2"), ValidationError);
  CHECK_THROWS_AS(BatchRatio::parse("0:1"), ValidationError);
  CHECK_THROWS_AS(BatchRatio::parse("a:b"), ValidationError);
  SamplerConfig cfg;
  cfg.ratio = BatchRatio::parse("3:1");
  cfg.batch_target = 32;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.batch_target = 30;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("schedule: ratio, coverage and determinism") {
  const Manifest target = target_of(100);
  const Manifest aux = aux_with_counts({50, 10, 3});
  SamplerConfig cfg;
  cfg.ratio = BatchRatio::parse("2:1");
  cfg.batch_target = 32;
  const BatchScheduler sched(target, aux, cfg, 17);
  CHECK(sched.batches_per_epoch() == 4);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    const auto plans = sched.epoch_plans(epoch);
    REQUIRE(plans.size() == 4);
    std::vector<int> seen(100, 0);
    for (std::size_t b = 0; b < plans.size(); ++b) {
      const auto& p = plans[b];
      CHECK(p.epoch == epoch);
      CHECK(p.iteration == epoch * 4 + b);
      for (auto i : p.target) ++seen[i];
      for (auto i : p.auxiliary) CHECK(i < aux.size());
      if (p.target.size() == 32) CHECK(p.auxiliary.size() == 16);
    }
    CHECK(plans.back().target.size() == 4);
    CHECK(plans.back().auxiliary.size() == 2);
    for (int s : seen) CHECK(s == 1);
  }
  const BatchScheduler same(target, aux, cfg, 17);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto a = sched.epoch_plans(e);
    const auto b = same.epoch_plans(e);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].target == b[i].target);
      CHECK(a[i].auxiliary == b[i].auxiliary);
    }
  }
  CHECK(BatchScheduler(target, aux, cfg, 18).epoch_plans(0)[0].target != sched.epoch_plans(0)[0].target);
}

TEST_CASE("schedule: short batch keeps at least one auxiliary draw") {
  const Manifest aux = aux_with_counts({5, 5});
  SamplerConfig cfg;
  cfg.ratio = BatchRatio::parse("2:1");
  cfg.batch_target = 32;
  const auto plans = BatchScheduler(target_of(33), aux, cfg, 1).epoch_plans(0);
  REQUIRE(plans.size() == 2);
  CHECK(plans[1].target.size() == 1);
  CHECK(plans[1].auxiliary.size() == 1);
  CHECK(cfg.auxiliary_size(1, false) == 0);
}

TEST_CASE("schedule: empty auxiliary gives target-only plans") {
  Manifest aux = aux_with_counts({1, 1});
  aux.samples.clear();
  SamplerConfig cfg;
  for (const auto& p : BatchScheduler(target_of(70), aux, cfg, 2).epoch_plans(0)) CHECK(p.auxiliary.empty());
  Manifest empty_target = target_of(1);
  empty_target.samples.clear();
  CHECK_THROWS_AS(BatchScheduler(empty_target, aux, cfg, 2), ValidationError);
}

TEST_CASE("schedule: auxiliary draws depend on class counts, not manifest order") {
  const Manifest aux = aux_with_counts({20, 8, 3});
  Manifest shuffled = aux;
  RngStream rng(95, "order");
  rng.shuffle(shuffled.samples);
  SamplerConfig cfg;
  cfg.ratio = BatchRatio::parse("1:1");
  cfg.batch_target = 8;
  const auto a = BatchScheduler(target_of(40), aux, cfg, 4).epoch_draws(0);
  const auto b = BatchScheduler(target_of(40), shuffled, cfg, 4).epoch_draws(0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == b[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      CHECK(a[i][j].cls == b[i][j].cls);
      CHECK(a[i][j].rank == b[i][j].rank);
    }
  }
}
