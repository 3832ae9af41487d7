#include "omni/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "omni/error.hpp"
#include "omni/teacher.hpp"

namespace omni {

std::string_view to_string(ResampleKind kind) {
  switch (kind) {
    case ResampleKind::kNone: return "none";
    case ResampleKind::kClipped: return "clipped";
    case ResampleKind::kPower: return "power";
  }
  return "none";
}

ResampleKind parse_resample_kind(std::string_view text) {
  if (text == "none") return ResampleKind::kNone;
  if (text == "clipped") return ResampleKind::kClipped;
  if (text == "power") return ResampleKind::kPower;
  throw ValidationError("unknown resample kind '" + std::string(text) + "'");
}

void ResampleStrategy::validate() const {
  if (kind == ResampleKind::kClipped && !(n_c >= 1.0)) throw ValidationError("resample: n_c must be >= 1");
  if (kind == ResampleKind::kPower && !(p > 0.0 && p <= 1.0)) {
    throw ValidationError("resample: p must be in (0,1]");
  }
}

std::vector<double> class_weights(std::span<const std::size_t> counts, const ResampleStrategy& strategy) {
  strategy.validate();
  std::vector<double> w(counts.size(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double n = static_cast<double>(counts[c]);
    switch (strategy.kind) {
      case ResampleKind::kNone: w[c] = n; break;
      case ResampleKind::kClipped: w[c] = std::min(n, strategy.n_c); break;
      case ResampleKind::kPower: w[c] = counts[c] == 0 ? 0.0 : std::pow(n, strategy.p); break;
    }
    total += w[c];
  }
  if (total == 0.0) throw ValidationError("class_weights: all class counts are zero");
  for (double& v : w) v /= total;
  return w;
}

AuxiliarySampler::AuxiliarySampler(const Manifest& auxiliary, const ResampleStrategy& strategy) {
  strategy.validate();
  members_.resize(auxiliary.label_space.size());
  for (std::size_t i = 0; i < auxiliary.size(); ++i) {
    const auto y = auxiliary.samples[i].effective_label();
    if (!y || !auxiliary.label_space.contains(*y)) {
      throw ValidationError("auxiliary sample '" + auxiliary.samples[i].id + "' has no usable label");
    }
    members_[static_cast<std::size_t>(*y)].push_back(i);
  }
  members_total_ = auxiliary.size();
  if (members_total_ == 0) return;
  std::vector<std::size_t> counts;
  for (const auto& m : members_) counts.push_back(m.size());
  weights_ = class_weights(counts, strategy);
  double run = 0.0;
  for (double w : weights_) cumulative_.push_back(run += w);
}

AuxiliaryDraw AuxiliarySampler::draw(RngStream& rng) const {
  if (empty()) throw ValidationError("cannot draw from an empty auxiliary set");
  const double u = rng.uniform() * cumulative_.back();
  std::size_t cls = 0;
  while (cls + 1 < cumulative_.size() && !(u < cumulative_[cls] && weights_[cls] > 0.0)) ++cls;
  // Guard against landing on a trailing zero-weight class through rounding.
  while (members_[cls].empty()) --cls;
  const std::size_t rank = rng.index(members_[cls].size());
  return {cls, rank, members_[cls][rank]};
}

std::vector<std::size_t> draw_auxiliary(const Manifest& auxiliary, const ResampleStrategy& strategy,
                                        std::size_t n, RngStream& rng) {
  if (auxiliary.empty()) throw ValidationError("draw_auxiliary: empty manifest");
  AuxiliarySampler sampler(auxiliary, strategy);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = sampler.draw(rng).index;
  return out;
}

BatchRatio BatchRatio::parse(std::string_view text) {
  const auto colon = text.find(':');
  BatchRatio r;
  if (colon == std::string_view::npos) throw ValidationError("ratio must look like '2:1'");
  const auto a = text.substr(0, colon);
  const auto b = text.substr(colon + 1);
  auto [pa, ea] = std::from_chars(a.data(), a.data() + a.size(), r.target);
  auto [pb, eb] = std::from_chars(b.data(), b.data() + b.size(), r.auxiliary);
  if (ea != std::errc{} || eb != std::errc{} || pa != a.data() + a.size() || pb != b.data() + b.size()) {
    throw ValidationError("ratio must look like '2:1'");
  }
  if (r.target < 1 || r.auxiliary < 0) throw ValidationError("ratio terms must be target >= 1, auxiliary >= 0");
  return r;
}

std::string BatchRatio::to_string() const {
  return std::to_string(target) + ":" + std::to_string(auxiliary);
}

void SamplerConfig::validate() const {
  resample.validate();
  if (batch_target == 0) throw ValidationError("sampler: batch_target must be >= 1");
  if (ratio.target < 1 || ratio.auxiliary < 0) throw ValidationError("sampler: invalid ratio");
  if ((batch_target * static_cast<std::size_t>(ratio.auxiliary)) % static_cast<std::size_t>(ratio.target) != 0) {
    throw ValidationError("sampler: batch_target " + std::to_string(batch_target) +
                          " does not split at ratio " + ratio.to_string());
  }
}

std::size_t SamplerConfig::auxiliary_size(std::size_t target_size, bool auxiliary_available) const {
  if (!auxiliary_available || ratio.auxiliary == 0) return 0;
  const std::size_t n = target_size * static_cast<std::size_t>(ratio.auxiliary) /
                        static_cast<std::size_t>(ratio.target);
  return std::max<std::size_t>(n, 1);
}

BatchScheduler::BatchScheduler(const Manifest& target, const Manifest& auxiliary,
                               SamplerConfig config, std::uint64_t seed)
    : target_size_(target.size()),
      aux_(auxiliary, config.resample),
      config_(config),
      seed_(seed) {
  config_.validate();
  if (target.empty()) throw ValidationError("schedule: empty target set");
}

std::size_t BatchScheduler::batches_per_epoch() const {
  return omni::batches_per_epoch(target_size_, config_.batch_target);
}

std::vector<std::vector<AuxiliaryDraw>> BatchScheduler::epoch_draws(std::size_t epoch) const {
  const std::size_t nb = batches_per_epoch();
  std::vector<std::vector<AuxiliaryDraw>> draws(nb);
  if (aux_.empty()) return draws;
  RngStream rng(seed_, "aux-draws/" + std::to_string(epoch));
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t begin = b * config_.batch_target;
    const std::size_t size = std::min(target_size_, begin + config_.batch_target) - begin;
    const std::size_t n_aux = config_.auxiliary_size(size, true);
    draws[b].reserve(n_aux);
    for (std::size_t j = 0; j < n_aux; ++j) draws[b].push_back(aux_.draw(rng));
  }
  return draws;
}

std::vector<BatchPlan> BatchScheduler::epoch_plans(std::size_t epoch) const {
  const auto order = epoch_permutation(target_size_, seed_, epoch);
  const auto draws = epoch_draws(epoch);
  const std::size_t nb = batches_per_epoch();
  std::vector<BatchPlan> plans(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    BatchPlan& p = plans[b];
    p.epoch = epoch;
    p.iteration = epoch * nb + b;
    const std::size_t begin = b * config_.batch_target;
    const std::size_t end = std::min(target_size_, begin + config_.batch_target);
    p.target.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                    order.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& d : draws[b]) p.auxiliary.push_back(d.index);
  }
  return plans;
}

}  // namespace omni
