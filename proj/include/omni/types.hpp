#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace omni {

/// Ordered, unique class names. Class indices are positions in this list.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> class_names);

  /// Names "class_0" .. "class_{k-1}".
  static LabelSpace numbered(std::size_t k);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  bool contains(int class_index) const {
    return class_index >= 0 && static_cast<std::size_t>(class_index) < names_.size();
  }

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

/// A small row-major image with intensities in [0, 1].
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, int channels = 1, float fill = 0.0f);
  Frame(int width, int height, int channels, std::vector<float> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

  float at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  /// Channel-mean intensity at (x, y).
  double intensity(int x, int y) const;

  bool same_shape(const Frame& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  bool operator==(const Frame&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> pixels_;
};

struct FeatureVector {
  std::vector<double> values;

  std::size_t dims() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

enum class SourceKind { kImage, kTrimmed, kUntrimmed };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

struct Sample {
  std::string id;
  SourceKind source_kind = SourceKind::kImage;
  std::vector<Frame> frames;
  double fps = 0.0;
  std::optional<int> label;
  std::optional<int> pseudo_label;
  std::optional<double> confidence;
  std::optional<FeatureVector> feature;

  /// Ground-truth label if present, otherwise the pseudo-label.
  std::optional<int> effective_label() const { return label ? label : pseudo_label; }

  /// Throws ValidationError if a structural invariant is broken.
  void validate(const LabelSpace& labels) const;

  bool operator==(const Sample&) const = default;
};

enum class ManifestRole { kTarget, kWebPool, kAuxiliary, kValidation };

std::string_view to_string(ManifestRole role);
ManifestRole parse_manifest_role(std::string_view text);

struct Manifest {
  ManifestRole role = ManifestRole::kTarget;
  LabelSpace label_space;
  std::vector<Sample> samples;
  /// 0 while no sample carries a feature.
  std::size_t feature_dims = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void validate() const;

  bool operator==(const Manifest&) const = default;
};

}  // namespace omni
