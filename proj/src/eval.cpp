#include "omni/eval.hpp"

#include <algorithm>
#include <numeric>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : k_(num_classes), counts_(std::move(counts)) {
  if (counts_.size() != k_ * k_) {
    throw ValidationError("confusion matrix needs " + std::to_string(k_ * k_) + " counts, got " +
                          std::to_string(counts_.size()));
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= k_ || predicted >= k_) throw ValidationError("confusion matrix index out of range");
  counts_[truth * k_ + predicted] += n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const {
  return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(i * k_),
                         counts_.begin() + static_cast<std::ptrdiff_t>((i + 1) * k_), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < k_; ++i) {
    rows.push_back(std::vector<std::uint64_t>(counts_.begin() + static_cast<std::ptrdiff_t>(i * k_),
                                              counts_.begin() + static_cast<std::ptrdiff_t>((i + 1) * k_)));
  }
  return rows;
}

bool in_top_k(std::span<const double> probs, std::size_t cls, std::size_t k) {
  const double p = probs[cls];
  std::size_t ahead = 0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] > p || (probs[c] == p && c < cls)) ++ahead;
  }
  return ahead < k;
}

namespace {

void check_labeled(const ClassifierModel& model, const Manifest& manifest) {
  if (model.num_classes() != manifest.label_space.size()) {
    throw ValidationError("model has " + std::to_string(model.num_classes()) +
                          " classes, manifest has " + std::to_string(manifest.label_space.size()));
  }
  for (const auto& s : manifest.samples) {
    if (!s.label) throw ValidationError("evaluation sample '" + s.id + "' is unlabeled");
  }
}

std::vector<std::vector<double>> predict_all(const ClassifierModel& model, const Manifest& manifest) {
  std::vector<std::vector<double>> probs(manifest.size());
  parallel_for(manifest.size(), [&](std::size_t i) { probs[i] = predict_proba(model, manifest.samples[i]); });
  return probs;
}

double top_k_from(const std::vector<std::vector<double>>& probs, const Manifest& manifest, std::size_t k) {
  if (manifest.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (in_top_k(probs[i], static_cast<std::size_t>(*manifest.samples[i].label), k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(manifest.size());
}

}  // namespace

double top_k_accuracy(const ClassifierModel& model, const Manifest& manifest, std::size_t k) {
  check_labeled(model, manifest);
  if (k < 1 || k > model.num_classes()) {
    throw ValidationError("top_k_accuracy: k must be in [1, " + std::to_string(model.num_classes()) + "]");
  }
  return top_k_from(predict_all(model, manifest), manifest, k);
}

ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Manifest& manifest) {
  return evaluate(model, manifest).matrix;
}

Evaluation evaluate(const ClassifierModel& model, const Manifest& manifest) {
  check_labeled(model, manifest);
  const auto probs = predict_all(model, manifest);
  Evaluation out;
  out.top1 = top_k_from(probs, manifest, 1);
  out.top5 = top_k_from(probs, manifest, std::min<std::size_t>(5, model.num_classes()));
  out.matrix = ConfusionMatrix(model.num_classes());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out.matrix.add(static_cast<std::size_t>(*manifest.samples[i].label), argmax(probs[i]));
  }
  return out;
}

std::optional<double> confusion_score(std::uint64_t n_ij, std::uint64_t n_ji, std::uint64_t n_ii,
                                      std::uint64_t n_jj) {
  const std::uint64_t num = n_ij + n_ji;
  const std::uint64_t den = num + n_ii + n_jj;
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> confusion_score(const ConfusionMatrix& m, std::size_t i, std::size_t j) {
  if (i >= m.num_classes() || j >= m.num_classes()) throw ValidationError("confusion_score: index out of range");
  return confusion_score(m.at(i, j), m.at(j, i), m.at(i, i), m.at(j, j));
}

std::vector<PairScore> confusion_pairs(const ConfusionMatrix& m) {
  std::vector<PairScore> out;
  for (std::size_t i = 0; i < m.num_classes(); ++i) {
    for (std::size_t j = i + 1; j < m.num_classes(); ++j) {
      if (auto s = confusion_score(m, i, j)) out.push_back({i, j, *s});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const PairScore& a, const PairScore& b) { return a.score > b.score; });
  return out;
}

std::vector<PairDelta> ConfusionReport::most_improved(std::size_t n) const {
  std::vector<PairDelta> out;
  for (const auto& p : pairs) {
    if (out.size() == n) break;
    out.push_back(p);
  }
  return out;
}

std::vector<PairDelta> ConfusionReport::most_regressed(std::size_t n) const {
  std::vector<PairDelta> out;
  for (auto it = pairs.rbegin(); it != pairs.rend() && out.size() < n; ++it) out.push_back(*it);
  return out;
}

nlohmann::json ConfusionReport::to_json(const std::vector<std::string>& class_names) const {
  auto row = [&](const PairDelta& p) {
    nlohmann::json j{{"i", p.i}, {"j", p.j}, {"omni_score", p.omni_score},
                     {"base_score", p.base_score}, {"delta", p.delta}};
    if (p.i < class_names.size() && p.j < class_names.size()) {
      j["class_i"] = class_names[p.i];
      j["class_j"] = class_names[p.j];
    }
    return j;
  };
  nlohmann::json all = nlohmann::json::array();
  for (const auto& p : pairs) all.push_back(row(p));
  nlohmann::json improved = nlohmann::json::array();
  for (const auto& p : most_improved()) improved.push_back(row(p));
  nlohmann::json regressed = nlohmann::json::array();
  for (const auto& p : most_regressed()) regressed.push_back(row(p));
  return {{"omni_model", omni_id}, {"base_model", base_id}, {"pairs", all},
          {"most_improved", improved}, {"most_regressed", regressed}};
}

ConfusionReport confusion_delta(const ConfusionMatrix& omni, const ConfusionMatrix& base,
                                std::string omni_id, std::string base_id) {
  if (omni.num_classes() != base.num_classes()) {
    throw ValidationError("confusion_delta: K mismatch (" + std::to_string(omni.num_classes()) + " vs " +
                          std::to_string(base.num_classes()) + ")");
  }
  ConfusionReport report{std::move(omni_id), std::move(base_id), {}};
  for (std::size_t i = 0; i < omni.num_classes(); ++i) {
    for (std::size_t j = i + 1; j < omni.num_classes(); ++j) {
      const auto o = confusion_score(omni, i, j);
      const auto b = confusion_score(base, i, j);
      if (o && b) report.pairs.push_back({i, j, *o, *b, *o - *b});
    }
  }
  std::sort(report.pairs.begin(), report.pairs.end(), [](const PairDelta& a, const PairDelta& b) {
    if (a.delta != b.delta) return a.delta < b.delta;
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });
  return report;
}

}  // namespace omni
