#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/image_ops.hpp"
#include "omni/rng.hpp"
#include "omni/types.hpp"

namespace omni {

/// Projective transform of normalised image coordinates, where the frame
/// spans [-1, 1] in both axes (pixel centres at (2x+1)/W - 1). The matrix is
/// kept with its bottom-right entry equal to 1, so the remaining 8 entries
/// are the parameter vector.
class Homography {
 public:
  using Matrix = std::array<double, 9>;
  using Params = std::array<double, 8>;

  Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

  static Homography identity() { return {}; }
  static Homography from_params(const Params& p);
  /// Divides through by the bottom-right entry, which must be non-zero.
  static Homography from_matrix(const Matrix& m);
  /// Pure shift by (tx, ty) pixels on a width x height frame.
  static Homography translation_pixels(double tx, double ty, int width, int height);

  const Matrix& matrix() const { return m_; }
  Params params() const;
  double determinant() const;
  bool invertible() const;
  Homography inverse() const;

  /// Maps a normalised point; returns nullopt when it lands on or behind the
  /// line at infinity.
  std::optional<std::array<double, 2>> map(double u, double v) const;

  /// (this * other): applies `other` first, then `this`.
  Homography operator*(const Homography& other) const;

  bool operator==(const Homography&) const = default;

 private:
  Matrix m_;
};

/// True when every frame corner maps in front of the camera and inside
/// [-bound, bound]^2, i.e. within `bound` times the frame extent.
bool within_corner_bound(const Homography& h, double bound = 2.0);

/// Inverse warp with bilinear interpolation: output pixel p samples the
/// input at h^-1(p).
Frame apply_homography(const Frame& frame, const Homography& h, const Fill& fill = {});

/// Gaussian over homography parameter vectors.
struct WarpModel {
  std::array<double, 8> mu{};
  std::array<double, 64> sigma{};  // row-major 8x8
  /// Class the model was fitted on; nullopt for the class-agnostic model.
  std::optional<int> class_index;

  void validate() const;
  nlohmann::json to_json() const;
  static WarpModel from_json(const nlohmann::json& j);
};

/// Per-video homography list, optionally tagged with the video's class.
struct HomographySequence {
  std::optional<int> class_index;
  std::vector<Homography> steps;
};

/// Maximum-likelihood Gaussian over the pooled parameter vectors: sample
/// mean and biased (1/n) covariance. With `class_scope` set only sequences
/// of that class contribute.
WarpModel fit_warp_model(std::span<const HomographySequence> sequences,
                         std::optional<int> class_scope = std::nullopt);

inline constexpr int kMaxWarpDraws = 100;

/// Draws parameters from N(mu, sigma) (negative eigenvalues clamped to 0),
/// redrawing singular or out-of-bound warps. Throws RuntimeError after
/// kMaxWarpDraws consecutive rejections.
Homography sample_homography(const WarpModel& model, RngStream& rng);

void save_warp_models(std::span<const WarpModel> models, const std::filesystem::path& path);
/// Accepts a single model object or an array of them.
std::vector<WarpModel> load_warp_models(const std::filesystem::path& path);

nlohmann::json sequences_to_json(std::span<const HomographySequence> sequences);
std::vector<HomographySequence> sequences_from_json(const nlohmann::json& j);

}  // namespace omni
