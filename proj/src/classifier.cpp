#include "omni/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "omni/binary_io.hpp"
#include "omni/error.hpp"

namespace omni {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kMlp ? "mlp-1hidden" : "linear-softmax";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "linear-softmax" || text == "linear") return ModelKind::kLinearSoftmax;
  if (text == "mlp-1hidden" || text == "mlp") return ModelKind::kMlp;
  throw ValidationError("unknown model kind '" + std::string(text) + "'");
}

ClassifierModel::ClassifierModel(ModelKind kind, std::size_t input_dims, std::size_t hidden,
                                 std::size_t num_classes, FeaturizerConfig featurizer)
    : kind_(kind),
      input_dims_(input_dims),
      hidden_(hidden),
      num_classes_(num_classes),
      featurizer_(featurizer) {
  if (num_classes < 2) throw ValidationError("classifier needs K >= 2");
  if (input_dims == 0) throw ValidationError("classifier needs input_dims >= 1");
  if (kind == ModelKind::kLinearSoftmax) {
    params_.assign(num_classes * input_dims + num_classes, 0.0);
  } else {
    if (hidden == 0) throw ValidationError("mlp needs a hidden width >= 1");
    params_.assign(hidden * input_dims + hidden + num_classes * hidden + num_classes, 0.0);
  }
}

ClassifierModel ClassifierModel::linear(std::size_t input_dims, std::size_t num_classes,
                                        FeaturizerConfig featurizer) {
  return ClassifierModel(ModelKind::kLinearSoftmax, input_dims, 0, num_classes, featurizer);
}

ClassifierModel ClassifierModel::mlp(std::size_t input_dims, std::size_t hidden,
                                     std::size_t num_classes, RngStream& rng,
                                     FeaturizerConfig featurizer) {
  ClassifierModel m(ModelKind::kMlp, input_dims, hidden, num_classes, featurizer);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dims));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  double* p = m.params_.data();
  for (std::size_t i = 0; i < hidden * input_dims; ++i) p[i] = rng.uniform(-r1, r1);
  p += hidden * input_dims + hidden;
  for (std::size_t i = 0; i < num_classes * hidden; ++i) p[i] = rng.uniform(-r2, r2);
  return m;
}

void ClassifierModel::check_input(std::span<const double> x) const {
  if (x.size() != input_dims_) {
    throw ValidationError("feature has " + std::to_string(x.size()) + " dims, model expects " +
                          std::to_string(input_dims_));
  }
}

void ClassifierModel::hidden_activations(std::span<const double> x, std::vector<double>& h) const {
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * input_dims_;
  h.resize(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    double s = b1[j];
    const double* row = w1 + j * input_dims_;
    for (std::size_t d = 0; d < input_dims_; ++d) s += row[d] * x[d];
    h[j] = std::tanh(s);
  }
}

std::vector<double> ClassifierModel::logits(std::span<const double> x) const {
  check_input(x);
  std::vector<double> z(num_classes_);
  if (kind_ == ModelKind::kLinearSoftmax) {
    const double* w = params_.data();
    const double* b = w + num_classes_ * input_dims_;
    for (std::size_t k = 0; k < num_classes_; ++k) {
      double s = b[k];
      const double* row = w + k * input_dims_;
      for (std::size_t d = 0; d < input_dims_; ++d) s += row[d] * x[d];
      z[k] = s;
    }
    return z;
  }
  std::vector<double> h;
  hidden_activations(x, h);
  const double* w2 = params_.data() + hidden_ * input_dims_ + hidden_;
  const double* b2 = w2 + num_classes_ * hidden_;
  for (std::size_t k = 0; k < num_classes_; ++k) {
    double s = b2[k];
    const double* row = w2 + k * hidden_;
    for (std::size_t j = 0; j < hidden_; ++j) s += row[j] * h[j];
    z[k] = s;
  }
  return z;
}

namespace {

// -sum_k t_k log p_k with log p from a max-shifted log-sum-exp. Zero-weight
// terms are skipped so a saturated p_k = 0 never produces 0 * inf.
double cross_entropy_from_logits(std::span<const double> z, std::span<const double> t,
                                 std::vector<double>& p) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double log_norm = zmax + std::log(sum);
  double loss = 0.0;
  p.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - log_norm);
    if (t[k] != 0.0) loss -= t[k] * (z[k] - log_norm);
  }
  return loss;
}

}  // namespace

double ClassifierModel::accumulate_gradient(std::span<const double> x,
                                            std::span<const double> target,
                                            std::span<double> grad) const {
  check_input(x);
  if (target.size() != num_classes_) throw ValidationError("target vector length != K");
  if (grad.size() != params_.size()) throw ValidationError("gradient buffer size mismatch");

  std::vector<double> p;
  if (kind_ == ModelKind::kLinearSoftmax) {
    const auto z = logits(x);
    const double loss = cross_entropy_from_logits(z, target, p);
    double* gw = grad.data();
    double* gb = gw + num_classes_ * input_dims_;
    double tsum = 0.0;
    for (double t : target) tsum += t;
    for (std::size_t k = 0; k < num_classes_; ++k) {
      // dCE/dz_k = p_k * sum(t) - t_k; sum(t) = 1 for proper label vectors.
      const double dz = p[k] * tsum - target[k];
      double* row = gw + k * input_dims_;
      for (std::size_t d = 0; d < input_dims_; ++d) row[d] += dz * x[d];
      gb[k] += dz;
    }
    return loss;
  }

  std::vector<double> h;
  hidden_activations(x, h);
  const double* w2 = params_.data() + hidden_ * input_dims_ + hidden_;
  const double* b2 = w2 + num_classes_ * hidden_;
  std::vector<double> z(num_classes_);
  for (std::size_t k = 0; k < num_classes_; ++k) {
    double s = b2[k];
    for (std::size_t j = 0; j < hidden_; ++j) s += w2[k * hidden_ + j] * h[j];
    z[k] = s;
  }
  const double loss = cross_entropy_from_logits(z, target, p);
  double tsum = 0.0;
  for (double t : target) tsum += t;

  double* gw1 = grad.data();
  double* gb1 = gw1 + hidden_ * input_dims_;
  double* gw2 = gb1 + hidden_;
  double* gb2 = gw2 + num_classes_ * hidden_;
  std::vector<double> dh(hidden_, 0.0);
  for (std::size_t k = 0; k < num_classes_; ++k) {
    const double dz = p[k] * tsum - target[k];
    gb2[k] += dz;
    for (std::size_t j = 0; j < hidden_; ++j) {
      gw2[k * hidden_ + j] += dz * h[j];
      dh[j] += dz * w2[k * hidden_ + j];
    }
  }
  for (std::size_t j = 0; j < hidden_; ++j) {
    const double da = dh[j] * (1.0 - h[j] * h[j]);
    gb1[j] += da;
    double* row = gw1 + j * input_dims_;
    for (std::size_t d = 0; d < input_dims_; ++d) row[d] += da * x[d];
  }
  return loss;
}

double ClassifierModel::loss(std::span<const double> x, std::span<const double> target) const {
  if (target.size() != num_classes_) throw ValidationError("target vector length != K");
  const auto z = logits(x);
  std::vector<double> p;
  return cross_entropy_from_logits(z, target, p);
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write model " + path.string());
  binio::write_magic(out, "OMDL");
  binio::write_le<std::uint32_t>(out, 1);  // format version
  binio::write_le<std::uint32_t>(out, kind_ == ModelKind::kMlp ? 1u : 0u);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(input_dims_));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(hidden_));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(num_classes_));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(featurizer_.grid));
  binio::write_le<std::uint32_t>(out, featurizer_.consensus == Consensus::kStackK ? 1u : 0u);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(featurizer_.stack_k));
  binio::write_le<std::uint64_t>(out, params_.size());
  for (double v : params_) binio::write_le<double>(out, v);
  if (!out) throw RuntimeError("failed writing model " + path.string());
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model " + path.string());
  binio::expect_magic(in, "OMDL");
  if (binio::read_le<std::uint32_t>(in, "version") != 1) {
    throw ValidationError(path.string() + ": unsupported model version");
  }
  const auto kind_tag = binio::read_le<std::uint32_t>(in, "kind");
  if (kind_tag > 1) throw ValidationError(path.string() + ": unknown model kind tag");
  const auto input_dims = binio::read_le<std::uint32_t>(in, "input_dims");
  const auto hidden = binio::read_le<std::uint32_t>(in, "hidden");
  const auto classes = binio::read_le<std::uint32_t>(in, "num_classes");
  FeaturizerConfig fc;
  fc.grid = static_cast<int>(binio::read_le<std::uint32_t>(in, "grid"));
  fc.consensus = binio::read_le<std::uint32_t>(in, "consensus") == 1 ? Consensus::kStackK
                                                                      : Consensus::kSegmentAverage;
  fc.stack_k = static_cast<int>(binio::read_le<std::uint32_t>(in, "stack_k"));
  ClassifierModel m(kind_tag == 1 ? ModelKind::kMlp : ModelKind::kLinearSoftmax, input_dims,
                    hidden, classes, fc);
  const auto count = binio::read_le<std::uint64_t>(in, "param count");
  if (count != m.params_.size()) throw ValidationError(path.string() + ": weight count mismatch");
  for (double& v : m.params_) {
    v = binio::read_le<double>(in, "weights");
    if (!std::isfinite(v)) throw ValidationError(path.string() + ": non-finite weight");
  }
  return m;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - zmax);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

std::vector<double> one_hot(std::size_t cls, std::size_t num_classes) {
  std::vector<double> v(num_classes, 0.0);
  v.at(cls) = 1.0;
  return v;
}

std::vector<double> predict_proba(const ClassifierModel& model, const FeatureVector& feature) {
  return softmax(model.logits(feature.values));
}

std::vector<double> predict_proba(const ClassifierModel& model, const Sample& sample) {
  if (sample.feature) {
    if (sample.feature->dims() != model.input_dims()) {
      throw ValidationError("sample '" + sample.id + "' feature has " +
                            std::to_string(sample.feature->dims()) + " dims, model expects " +
                            std::to_string(model.input_dims()));
    }
    return predict_proba(model, *sample.feature);
  }
  return predict_proba(model, featurize(sample, model.featurizer()));
}

namespace {

template <typename Input>
std::vector<double> ensemble_impl(std::span<const ClassifierModel> models, const Input& input) {
  if (models.empty()) throw ValidationError("ensemble needs at least one model");
  const std::size_t k = models.front().num_classes();
  for (const auto& m : models) {
    if (m.num_classes() != k) throw ValidationError("ensemble members disagree on K");
  }
  std::vector<double> mean(k, 0.0);
  for (const auto& m : models) {
    const auto p = predict_proba(m, input);
    for (std::size_t c = 0; c < k; ++c) mean[c] += p[c];
  }
  for (double& v : mean) v /= static_cast<double>(models.size());
  return mean;
}

}  // namespace

std::vector<double> ensemble_proba(std::span<const ClassifierModel> models, const Sample& sample) {
  return ensemble_impl(models, sample);
}

std::vector<double> ensemble_proba(std::span<const ClassifierModel> models,
                                   const FeatureVector& feature) {
  return ensemble_impl(models, feature);
}

}  // namespace omni
