#include "omni/types.hpp"

#include <cmath>
#include <set>

#include "omni/error.hpp"

namespace omni {

LabelSpace::LabelSpace(std::vector<std::string> class_names) : names_(std::move(class_names)) {
  if (names_.size() < 2) throw ValidationError("label space needs at least 2 classes");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw ValidationError("duplicate class name '" + n + "'");
  }
}

LabelSpace LabelSpace::numbered(std::size_t k) {
  std::vector<std::string> names;
  names.reserve(k);
  for (std::size_t i = 0; i < k; ++i) names.push_back("class_" + std::to_string(i));
  return LabelSpace(std::move(names));
}

Frame::Frame(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0) throw ValidationError("frame dimensions must be positive");
  if (channels != 1 && channels != 3) throw ValidationError("frame channels must be 1 or 3");
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Frame::Frame(int width, int height, int channels, std::vector<float> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) throw ValidationError("frame dimensions must be positive");
  if (channels != 1 && channels != 3) throw ValidationError("frame channels must be 1 or 3");
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ValidationError("frame pixel count " + std::to_string(pixels_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" + std::to_string(channels));
  }
  for (float p : pixels_) {
    if (!std::isfinite(p) || p < 0.0f || p > 1.0f) {
      throw ValidationError("frame pixel outside [0,1]");
    }
  }
}

double Frame::intensity(int x, int y) const {
  if (channels_ == 1) return at(x, y, 0);
  double s = 0.0;
  for (int c = 0; c < channels_; ++c) s += at(x, y, c);
  return s / channels_;
}

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kImage: return "image";
    case SourceKind::kTrimmed: return "trimmed";
    case SourceKind::kUntrimmed: return "untrimmed";
  }
  return "image";
}

SourceKind parse_source_kind(std::string_view text) {
  if (text == "image") return SourceKind::kImage;
  if (text == "trimmed") return SourceKind::kTrimmed;
  if (text == "untrimmed") return SourceKind::kUntrimmed;
  throw ValidationError("unknown source_kind '" + std::string(text) + "'");
}

std::string_view to_string(ManifestRole role) {
  switch (role) {
    case ManifestRole::kTarget: return "target";
    case ManifestRole::kWebPool: return "web_pool";
    case ManifestRole::kAuxiliary: return "auxiliary";
    case ManifestRole::kValidation: return "validation";
  }
  return "target";
}

ManifestRole parse_manifest_role(std::string_view text) {
  if (text == "target") return ManifestRole::kTarget;
  if (text == "web_pool") return ManifestRole::kWebPool;
  if (text == "auxiliary") return ManifestRole::kAuxiliary;
  if (text == "validation") return ManifestRole::kValidation;
  throw ValidationError("unknown manifest role '" + std::string(text) + "'");
}

void Sample::validate(const LabelSpace& labels) const {
  const std::string where = "sample '" + id + "': ";
  if (id.empty()) throw ValidationError("sample with empty id");
  if (source_kind == SourceKind::kImage && frames.size() != 1) {
    throw ValidationError(where + "image samples carry exactly one frame");
  }
  if (source_kind != SourceKind::kImage && frames.empty() && !feature) {
    throw ValidationError(where + "video samples need at least one frame");
  }
  if (label && pseudo_label) throw ValidationError(where + "label and pseudo_label both set");
  if (pseudo_label && !confidence) throw ValidationError(where + "pseudo_label without confidence");
  if (label && !labels.contains(*label)) throw ValidationError(where + "label out of range");
  if (pseudo_label && !labels.contains(*pseudo_label)) {
    throw ValidationError(where + "pseudo_label out of range");
  }
  if (confidence && !(*confidence >= 0.0 && *confidence <= 1.0)) {
    throw ValidationError(where + "confidence outside [0,1]");
  }
  if (feature) {
    for (double v : feature->values) {
      if (!std::isfinite(v)) throw ValidationError(where + "non-finite feature value");
    }
  }
}

void Manifest::validate() const {
  if (label_space.size() < 2) throw ValidationError("manifest label space needs at least 2 classes");
  for (const auto& s : samples) {
    s.validate(label_space);
    if (s.feature && s.feature->dims() != feature_dims) {
      throw ValidationError("sample '" + s.id + "' has " + std::to_string(s.feature->dims()) +
                            "-dim feature, manifest declares " + std::to_string(feature_dims));
    }
    switch (role) {
      case ManifestRole::kTarget:
      case ManifestRole::kValidation:
        if (!s.label) throw ValidationError("sample '" + s.id + "' in labeled manifest has no label");
        break;
      case ManifestRole::kAuxiliary:
        if (!s.pseudo_label || !s.confidence) {
          throw ValidationError("auxiliary sample '" + s.id + "' lacks pseudo_label/confidence");
        }
        break;
      case ManifestRole::kWebPool:
        break;
    }
  }
}

}  // namespace omni
