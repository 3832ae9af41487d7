#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/types.hpp"

namespace omni {

inline constexpr int kManifestVersion = 1;

struct ManifestSaveOptions {
  /// Write features to "<path>.omnf" (little-endian f32) instead of inline
  /// JSON. Values are rounded to single precision on the way out.
  bool external_features = false;
};

/// JSON-Lines manifest: header object on line 1, one sample per line after.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path,
                   const ManifestSaveOptions& options = {});
Manifest load_manifest(const std::filesystem::path& path);

nlohmann::json sample_to_json(const Sample& sample);

/// OMNF flat feature file: "OMNF", u32 count, u32 dims, u32 reserved, then
/// count*dims little-endian f32.
void save_feature_file(const std::vector<FeatureVector>& features, std::size_t dims,
                       const std::filesystem::path& path);
std::vector<FeatureVector> load_feature_file(const std::filesystem::path& path);

/// Writes `j` pretty-printed with a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace omni
