#include "omni/inflate.hpp"

#include <string>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {

std::string_view to_string(InflateMode mode) {
  switch (mode) {
    case InflateMode::kReplicate: return "replicate";
    case InflateMode::kTranslateRandom: return "translate-random";
    case InflateMode::kTranslateConstant: return "translate-constant";
    case InflateMode::kWarp: return "warp";
  }
  return "replicate";
}

InflateMode parse_inflate_mode(std::string_view text) {
  if (text == "replicate") return InflateMode::kReplicate;
  if (text == "translate-random") return InflateMode::kTranslateRandom;
  if (text == "translate-constant") return InflateMode::kTranslateConstant;
  if (text == "warp") return InflateMode::kWarp;
  throw ValidationError("unknown inflate mode '" + std::string(text) + "'");
}

void InflateConfig::validate() const {
  if (clip_len < 1) throw ValidationError("inflate: clip_len must be >= 1");
  if (mode == InflateMode::kWarp && warp_models.empty()) {
    throw ValidationError("inflate: warp mode needs a warp model");
  }
  if (mode != InflateMode::kWarp && !warp_models.empty()) {
    throw ValidationError("inflate: warp models only apply to warp mode");
  }
  if (translate_range < 0.0) throw ValidationError("inflate: translate_range must be >= 0");
  for (const auto& m : warp_models) m.validate();
}

namespace {

const WarpModel& pick_model(const std::vector<WarpModel>& models, std::optional<int> cls,
                            const std::string& id) {
  const WarpModel* agnostic = nullptr;
  for (const auto& m : models) {
    if (cls && m.class_index == cls) return m;
    if (!m.class_index && !agnostic) agnostic = &m;
  }
  if (!agnostic) {
    throw ValidationError("inflate: no warp model for sample '" + id +
                          "' (no class-specific match and no class-agnostic model)");
  }
  return *agnostic;
}

}  // namespace

InflatedClip inflate_image_with_chain(const Sample& image, const InflateConfig& config,
                                      RngStream& rng) {
  config.validate();
  if (image.source_kind != SourceKind::kImage || image.frames.size() != 1) {
    throw ValidationError("inflate: sample '" + image.id + "' is not a single image");
  }
  const Frame& still = image.frames.front();
  InflatedClip out;
  Sample& clip = out.clip;
  clip.id = image.id + "#inflated";
  clip.source_kind = SourceKind::kTrimmed;
  clip.fps = image.fps;
  clip.label = image.label;
  clip.pseudo_label = image.pseudo_label;
  clip.confidence = image.confidence;
  clip.frames.reserve(static_cast<std::size_t>(config.clip_len));
  clip.frames.push_back(still);

  const WarpModel* warp = config.mode == InflateMode::kWarp
                              ? &pick_model(config.warp_models, image.effective_label(), image.id)
                              : nullptr;
  for (int i = 1; i < config.clip_len; ++i) {
    if (config.mode == InflateMode::kReplicate) {
      clip.frames.push_back(still);
      continue;
    }
    Homography h;
    switch (config.mode) {
      case InflateMode::kTranslateConstant:
        h = Homography::translation_pixels(config.speed_x, config.speed_y, still.width(), still.height());
        break;
      case InflateMode::kTranslateRandom: {
        const double tx = rng.uniform(-config.translate_range, config.translate_range);
        const double ty = rng.uniform(-config.translate_range, config.translate_range);
        h = Homography::translation_pixels(tx, ty, still.width(), still.height());
        break;
      }
      case InflateMode::kWarp:
        h = sample_homography(*warp, rng);
        break;
      case InflateMode::kReplicate:
        break;
    }
    clip.frames.push_back(apply_homography(clip.frames.back(), h, config.fill));
    out.steps.push_back(h);
  }
  return out;
}

Sample inflate_image(const Sample& image, const InflateConfig& config, RngStream& rng) {
  return inflate_image_with_chain(image, config, rng).clip;
}

Manifest inflate_manifest(const Manifest& manifest, const InflateConfig& config, std::uint64_t seed) {
  config.validate();
  Manifest out;
  out.role = manifest.role;
  out.label_space = manifest.label_space;
  out.samples.resize(manifest.size());
  parallel_for(manifest.size(), [&](std::size_t i) {
    const Sample& s = manifest.samples[i];
    RngStream rng(seed, "inflate/" + s.id);
    out.samples[i] = inflate_image(s, config, rng);
  });
  return out;
}

}  // namespace omni
