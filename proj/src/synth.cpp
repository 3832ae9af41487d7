#include "omni/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "omni/error.hpp"
#include "omni/manifest_io.hpp"
#include "omni/parallel.hpp"
#include "omni/rng.hpp"

namespace omni {

void SynthSpec::validate() const {
  if (num_classes < 2) throw ValidationError("synth: need at least 2 classes");
  if (width < 4 || height < 4) throw ValidationError("synth: frames must be at least 4x4");
  if (modes_per_class < 1) throw ValidationError("synth: modes_per_class must be >= 1");
  if (clip_frames < 1) throw ValidationError("synth: clip_frames must be >= 1");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) throw ValidationError("synth: noise_fraction must be in [0,1]");
  if (!(ood_adjacent_bias >= 0.0 && ood_adjacent_bias <= 1.0)) {
    throw ValidationError("synth: ood_adjacent_bias must be in [0,1]");
  }
  if (!(ood_offset > 0.0 && ood_offset < 1.0)) throw ValidationError("synth: ood_offset must be in (0,1)");
  if (!(untrimmed_class_fraction >= 0.0 && untrimmed_class_fraction <= 1.0)) {
    throw ValidationError("synth: untrimmed_class_fraction must be in [0,1]");
  }
  if (!(blob_sigma > 0.0) || ring_radius < 0.0 || position_jitter < 0.0 || motion_per_frame < 0.0 ||
      pixel_noise < 0.0 || web_pixel_noise < 0.0 || clutter_amplitude < 0.0 || !(clutter_sigma > 0.0) || camera_jitter < 0.0) {
    throw ValidationError("synth: scales must be non-negative (blob_sigma positive)");
  }
  if (!(clutter_probability >= 0.0 && clutter_probability <= 1.0) ||
      !(web_clutter_probability >= 0.0 && web_clutter_probability <= 1.0)) {
    throw ValidationError("synth: clutter probabilities must be in [0,1]");
  }
  if (!(untrimmed_fps > 0.0) || !(untrimmed_seconds > 0.0) || !(segment_seconds > 0.0)) {
    throw ValidationError("synth: untrimmed fps and durations must be positive");
  }
  if (untrimmed_pool_size > 0 && std::lround(untrimmed_seconds * untrimmed_fps) < 1) {
    throw ValidationError("synth: untrimmed videos would have no frames");
  }
  if (warp_steps < 1) throw ValidationError("synth: warp_steps must be >= 1");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"num_classes", num_classes},
          {"width", width},
          {"height", height},
          {"target_size", target_size},
          {"validation_size", validation_size},
          {"clip_frames", clip_frames},
          {"image_pool_size", image_pool_size},
          {"trimmed_pool_size", trimmed_pool_size},
          {"untrimmed_pool_size", untrimmed_pool_size},
          {"noise_fraction", noise_fraction},
          {"ood_adjacent_bias", ood_adjacent_bias},
          {"ood_offset", ood_offset},
          {"ood_query_shift", ood_query_shift},
          {"target_class_skew", target_class_skew},
          {"pool_class_skew", pool_class_skew},
          {"ring_radius", ring_radius},
          {"modes_per_class", modes_per_class},
          {"ring_spacing", ring_spacing},
          {"ring_twist", ring_twist},
          {"blob_sigma", blob_sigma},
          {"blob_amplitude", blob_amplitude},
          {"background", background},
          {"position_jitter", position_jitter},
          {"motion_per_frame", motion_per_frame},
          {"pixel_noise", pixel_noise},
          {"web_pixel_noise", web_pixel_noise},
          {"clutter_probability", clutter_probability},
          {"web_clutter_probability", web_clutter_probability},
          {"clutter_amplitude", clutter_amplitude},
          {"clutter_sigma", clutter_sigma},
          {"untrimmed_fps", untrimmed_fps},
          {"untrimmed_seconds", untrimmed_seconds},
          {"segment_seconds", segment_seconds},
          {"untrimmed_class_fraction", untrimmed_class_fraction},
          {"warp_sequences", warp_sequences},
          {"warp_steps", warp_steps},
          {"camera_jitter", camera_jitter}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("num_classes", s.num_classes);
  get("width", s.width);
  get("height", s.height);
  get("target_size", s.target_size);
  get("validation_size", s.validation_size);
  get("clip_frames", s.clip_frames);
  get("image_pool_size", s.image_pool_size);
  get("trimmed_pool_size", s.trimmed_pool_size);
  get("untrimmed_pool_size", s.untrimmed_pool_size);
  get("noise_fraction", s.noise_fraction);
  get("ood_adjacent_bias", s.ood_adjacent_bias);
  get("ood_offset", s.ood_offset);
  get("ood_query_shift", s.ood_query_shift);
  get("target_class_skew", s.target_class_skew);
  get("pool_class_skew", s.pool_class_skew);
  get("ring_radius", s.ring_radius);
  get("modes_per_class", s.modes_per_class);
  get("ring_spacing", s.ring_spacing);
  get("ring_twist", s.ring_twist);
  get("blob_sigma", s.blob_sigma);
  get("blob_amplitude", s.blob_amplitude);
  get("background", s.background);
  get("position_jitter", s.position_jitter);
  get("motion_per_frame", s.motion_per_frame);
  get("pixel_noise", s.pixel_noise);
  get("web_pixel_noise", s.web_pixel_noise);
  get("clutter_probability", s.clutter_probability);
  get("web_clutter_probability", s.web_clutter_probability);
  get("clutter_amplitude", s.clutter_amplitude);
  get("clutter_sigma", s.clutter_sigma);
  get("untrimmed_fps", s.untrimmed_fps);
  get("untrimmed_seconds", s.untrimmed_seconds);
  get("segment_seconds", s.segment_seconds);
  get("untrimmed_class_fraction", s.untrimmed_class_fraction);
  get("warp_sequences", s.warp_sequences);
  get("warp_steps", s.warp_steps);
  get("camera_jitter", s.camera_jitter);
  s.validate();
  return s;
}

namespace {

std::vector<std::vector<BlobArchetype>> ring(const SynthSpec& spec, double offset) {
  const double cx = (spec.width - 1) / 2.0;
  const double cy = (spec.height - 1) / 2.0;
  const double k = static_cast<double>(spec.num_classes);
  const double mid = (static_cast<double>(spec.modes_per_class) - 1.0) / 2.0;
  std::vector<std::vector<BlobArchetype>> out(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t m = 0; m < spec.modes_per_class; ++m) {
      const double r = spec.ring_radius + (static_cast<double>(m) - mid) * spec.ring_spacing;
      const double a = 2.0 * std::numbers::pi * (static_cast<double>(c) + offset + m * spec.ring_twist) / k;
      out[c].push_back({cx + r * std::cos(a), cy + r * std::sin(a), spec.blob_sigma});
    }
  }
  return out;
}

struct Blob {
  double x, y, sigma, amplitude;
};

Frame render(const SynthSpec& spec, const std::vector<Blob>& blobs, double noise, RngStream& rng) {
  std::vector<float> px(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height));
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v = spec.background;
      for (const auto& b : blobs) {
        const double dx = x - b.x;
        const double dy = y - b.y;
        v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      if (noise > 0.0) v += noise * rng.normal();
      px[static_cast<std::size_t>(y) * spec.width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Frame(spec.width, spec.height, 1, std::move(px));
}

/// Capture conditions: target footage or web footage.
struct Look {
  double noise;
  double clutter_probability;
};

Look target_look(const SynthSpec& spec) { return {spec.pixel_noise, spec.clutter_probability}; }
Look web_look(const SynthSpec& spec) { return {spec.web_pixel_noise, spec.web_clutter_probability}; }

/// Scene content that stays put for a whole sample, plus a drift velocity.
struct Scene {
  std::optional<Blob> subject;
  std::optional<Blob> clutter;
  double vx = 0.0;
  double vy = 0.0;
};

Scene make_scene(const SynthSpec& spec, const BlobArchetype* subject, const Look& look, RngStream& rng) {
  Scene s;
  if (subject) {
    s.subject = Blob{subject->x + spec.position_jitter * rng.normal(),
                     subject->y + spec.position_jitter * rng.normal(), subject->sigma, spec.blob_amplitude};
  }
  if (rng.uniform() < look.clutter_probability) {
    s.clutter = Blob{rng.uniform(0.0, spec.width - 1.0), rng.uniform(0.0, spec.height - 1.0), spec.clutter_sigma,
                     spec.clutter_amplitude};
  }
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.vx = spec.motion_per_frame * std::cos(heading);
  s.vy = spec.motion_per_frame * std::sin(heading);
  return s;
}

Frame render_scene(const SynthSpec& spec, const Scene& scene, int t, double noise, RngStream& rng) {
  std::vector<Blob> blobs;
  if (scene.subject) {
    Blob b = *scene.subject;
    b.x += scene.vx * t;
    b.y += scene.vy * t;
    blobs.push_back(b);
  }
  if (scene.clutter) blobs.push_back(*scene.clutter);
  return render(spec, blobs, noise, rng);
}

std::vector<Frame> render_clip(const SynthSpec& spec, const BlobArchetype* subject, int frames, const Look& look,
                               RngStream& rng) {
  const Scene scene = make_scene(spec, subject, look, rng);
  std::vector<Frame> out;
  for (int t = 0; t < frames; ++t) out.push_back(render_scene(spec, scene, t, look.noise, rng));
  return out;
}

std::string numbered_id(const char* prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return prefix + digits;
}

/// Exactly n labels with per-class quotas proportional to exp(-skew * c)
/// (largest remainder), in shuffled order.
std::vector<int> class_quota(std::size_t k, std::size_t n, double skew, RngStream& rng) {
  std::vector<double> w(k);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) total += w[c] = std::exp(-skew * static_cast<double>(c));
  std::vector<std::size_t> count(k);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(n) * w[c] / total;
    count[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += count[c];
    remainder.push_back({exact - std::floor(exact), c});
  }
  std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++count[remainder[r % k].second];
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), count[c], static_cast<int>(c));
  rng.shuffle(labels);
  return labels;
}

Manifest labeled_set(const SynthSpec& spec, ManifestRole role, const char* prefix, std::size_t n, double skew,
                     std::uint64_t seed) {
  const auto classes = class_archetypes(spec);
  Manifest m;
  m.role = role;
  m.label_space = LabelSpace::numbered(spec.num_classes);
  m.samples.resize(n);
  const std::string stream = std::string("synth/") + prefix + "/";
  RngStream layout(seed, stream + "layout");
  const auto labels = class_quota(spec.num_classes, n, skew, layout);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng(seed, stream + std::to_string(i));
    const auto c = static_cast<std::size_t>(labels[i]);
    Sample& s = m.samples[i];
    s.id = numbered_id(prefix, i);
    s.source_kind = SourceKind::kTrimmed;
    s.fps = spec.untrimmed_fps;
    s.label = labels[i];
    const auto& site = classes[c][rng.index(spec.modes_per_class)];
    s.frames = render_clip(spec, &site, spec.clip_frames, target_look(spec), rng);
  });
  return m;
}

/// Pool layout: exactly round(noise_fraction * n) out-of-distribution slots
/// at shuffled positions; in-distribution classes follow the pool skew, which
/// starts at class `phase` so different pools favour different classes.
struct PoolSlot {
  int generating_class = -1;
  int ood_archetype = -1;
  int query_class = 0;
};

std::vector<PoolSlot> pool_layout(const SynthSpec& spec, std::size_t n, const std::string& pool,
                                  std::size_t phase, std::uint64_t seed) {
  RngStream rng(seed, "synth/" + pool + "/layout");
  const auto n_ood = static_cast<std::size_t>(std::llround(spec.noise_fraction * static_cast<double>(n)));
  std::vector<bool> ood(n, false);
  std::fill(ood.begin(), ood.begin() + static_cast<std::ptrdiff_t>(std::min(n_ood, n)), true);
  rng.shuffle(ood);

  std::vector<double> cumulative;
  double run = 0.0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const auto rank = (c + spec.num_classes - phase % spec.num_classes) % spec.num_classes;
    cumulative.push_back(run += std::exp(-spec.pool_class_skew * static_cast<double>(rank)));
  }
  const int k = static_cast<int>(spec.num_classes);
  std::vector<PoolSlot> slots(n);
  for (std::size_t i = 0; i < n; ++i) {
    PoolSlot& s = slots[i];
    if (ood[i]) {
      s.ood_archetype = static_cast<int>(rng.index(spec.num_classes));
      const int shifted = ((s.ood_archetype + spec.ood_query_shift) % k + k) % k;
      s.query_class = rng.uniform() < spec.ood_adjacent_bias ? shifted : static_cast<int>(rng.index(spec.num_classes));
    } else {
      const double u = rng.uniform() * run;
      int c = 0;
      while (c + 1 < k && !(u < cumulative[static_cast<std::size_t>(c)])) ++c;
      s.generating_class = c;
      s.query_class = c;
    }
  }
  return slots;
}

Manifest empty_pool(const SynthSpec& spec) {
  Manifest m;
  m.role = ManifestRole::kWebPool;
  m.label_space = LabelSpace::numbered(spec.num_classes);
  return m;
}

void clip_pool(const SynthSpec& spec, std::size_t n, const char* pool, const char* prefix, int frames,
               SourceKind kind, std::size_t phase, std::uint64_t seed, Manifest& out, std::vector<SidecarEntry>& sidecar) {
  const auto classes = class_archetypes(spec);
  const auto ood = ood_archetypes(spec);
  const auto slots = pool_layout(spec, n, pool, phase, seed);
  out = empty_pool(spec);
  out.samples.resize(n);
  sidecar.resize(n);
  const std::string stream = std::string("synth/") + pool + "/";
  parallel_for(n, [&](std::size_t i) {
    RngStream rng(seed, stream + std::to_string(i));
    const PoolSlot& slot = slots[i];
    const auto& sites = slot.generating_class >= 0 ? classes[static_cast<std::size_t>(slot.generating_class)]
                                                   : ood[static_cast<std::size_t>(slot.ood_archetype)];
    const BlobArchetype* subject = &sites[rng.index(sites.size())];
    Sample& s = out.samples[i];
    s.id = numbered_id(prefix, i);
    s.source_kind = kind;
    s.fps = spec.untrimmed_fps;
    s.frames = render_clip(spec, subject, frames, web_look(spec), rng);
    sidecar[i] = {s.id, slot.generating_class, slot.query_class};
  });
}

void untrimmed_pool(const SynthSpec& spec, std::uint64_t seed, Manifest& out, std::vector<SidecarEntry>& sidecar) {
  const std::size_t n = spec.untrimmed_pool_size;
  const auto classes = class_archetypes(spec);
  const auto ood = ood_archetypes(spec);
  const auto slots = pool_layout(spec, n, "untrimmed", 2 * spec.num_classes / 3, seed);
  const int total_frames = static_cast<int>(std::lround(spec.untrimmed_seconds * spec.untrimmed_fps));
  const int seg_frames = std::max(1, static_cast<int>(std::lround(spec.segment_seconds * spec.untrimmed_fps)));
  const int n_segments = (total_frames + seg_frames - 1) / seg_frames;
  out = empty_pool(spec);
  out.samples.resize(n);
  sidecar.resize(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng(seed, "synth/untrimmed/" + std::to_string(i));
    const PoolSlot& slot = slots[i];
    // Which segments show the subject: a fixed share for in-distribution
    // videos, every segment (showing the off-class blob) otherwise.
    std::vector<bool> shows(static_cast<std::size_t>(n_segments), slot.generating_class < 0);
    if (slot.generating_class >= 0) {
      const auto k = static_cast<std::size_t>(
          std::llround(spec.untrimmed_class_fraction * static_cast<double>(n_segments)));
      std::fill(shows.begin(), shows.begin() + static_cast<std::ptrdiff_t>(std::min(k, shows.size())), true);
      rng.shuffle(shows);
    }
    const auto& sites = slot.generating_class >= 0 ? classes[static_cast<std::size_t>(slot.generating_class)]
                                                   : ood[static_cast<std::size_t>(slot.ood_archetype)];
    Sample& s = out.samples[i];
    s.id = numbered_id("u", i);
    s.source_kind = SourceKind::kUntrimmed;
    s.fps = spec.untrimmed_fps;
    for (int seg = 0; seg < n_segments; ++seg) {
      const BlobArchetype* subject = &sites[rng.index(sites.size())];
      const Scene scene = make_scene(spec, shows[static_cast<std::size_t>(seg)] ? subject : nullptr, web_look(spec), rng);
      const int len = std::min(seg_frames, total_frames - seg * seg_frames);
      for (int t = 0; t < len; ++t) s.frames.push_back(render_scene(spec, scene, t, spec.web_pixel_noise, rng));
    }
    sidecar[i] = {s.id, slot.generating_class, slot.query_class};
  });
}

/// Camera shake around a per-class mean drift, so class-specific warp models
/// differ from the pooled one.
std::vector<HomographySequence> camera_sequences(const SynthSpec& spec, std::uint64_t seed) {
  std::vector<HomographySequence> out(spec.warp_sequences);
  const double j = spec.camera_jitter;
  for (std::size_t s = 0; s < out.size(); ++s) {
    RngStream rng(seed, "synth/camera/" + std::to_string(s));
    const int cls = static_cast<int>(s % spec.num_classes);
    const double heading = 2.0 * std::numbers::pi * cls / static_cast<double>(spec.num_classes);
    const double drift = 2.0 * j;
    out[s].class_index = cls;
    for (int t = 0; t < spec.warp_steps; ++t) {
      const double tx = drift * std::cos(heading) + j * rng.normal();
      const double ty = drift * std::sin(heading) + j * rng.normal();
      const double theta = j * rng.normal();
      const double scale = 1.0 + j * rng.normal();
      const double p1 = 0.1 * j * rng.normal();
      const double p2 = 0.1 * j * rng.normal();
      const double c = scale * std::cos(theta);
      const double sn = scale * std::sin(theta);
      out[s].steps.push_back(Homography::from_params({c, -sn, tx, sn, c, ty, p1, p2}));
    }
  }
  return out;
}

nlohmann::json sidecar_json(const std::vector<SidecarEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"id", e.id}, {"generating_class", e.generating_class}, {"query_class", e.query_class}});
  }
  return arr;
}

}  // namespace

std::vector<std::vector<BlobArchetype>> class_archetypes(const SynthSpec& spec) { return ring(spec, 0.0); }

std::vector<std::vector<BlobArchetype>> ood_archetypes(const SynthSpec& spec) {
  return ring(spec, spec.ood_offset);
}

SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthData d;
  d.target = labeled_set(spec, ManifestRole::kTarget, "t", spec.target_size, spec.target_class_skew, seed);
  d.validation = labeled_set(spec, ManifestRole::kValidation, "v", spec.validation_size, 0.0, seed);
  clip_pool(spec, spec.image_pool_size, "images", "i", 1, SourceKind::kImage, 0, seed, d.image_pool, d.image_sidecar);
  clip_pool(spec, spec.trimmed_pool_size, "trimmed", "w", spec.clip_frames, SourceKind::kTrimmed, spec.num_classes / 3, seed,
            d.trimmed_pool, d.trimmed_sidecar);
  untrimmed_pool(spec, seed, d.untrimmed_pool, d.untrimmed_sidecar);
  d.sequences = camera_sequences(spec, seed);
  return d;
}

Manifest query_labeled(const Manifest& pool, const std::vector<SidecarEntry>& sidecar) {
  if (sidecar.size() != pool.size()) throw ValidationError("query_labeled: sidecar size differs from pool");
  Manifest out;
  out.role = ManifestRole::kAuxiliary;
  out.label_space = pool.label_space;
  out.feature_dims = pool.feature_dims;
  out.samples = pool.samples;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (sidecar[i].id != out.samples[i].id) {
      throw ValidationError("query_labeled: sidecar entry '" + sidecar[i].id + "' does not match sample '" +
                            out.samples[i].id + "'");
    }
    out.samples[i].label.reset();
    out.samples[i].pseudo_label = sidecar[i].query_class;
    out.samples[i].confidence = 1.0;
  }
  return out;
}

nlohmann::json sidecar_to_json(const SynthData& data) {
  return {{"images", sidecar_json(data.image_sidecar)},
          {"trimmed", sidecar_json(data.trimmed_sidecar)},
          {"untrimmed", sidecar_json(data.untrimmed_sidecar)}};
}

void save_synthetic(const SynthData& data, const SynthSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_manifest(data.target, dir / "target.jsonl");
  save_manifest(data.validation, dir / "validation.jsonl");
  save_manifest(data.image_pool, dir / "pool_images.jsonl");
  save_manifest(data.trimmed_pool, dir / "pool_trimmed.jsonl");
  save_manifest(data.untrimmed_pool, dir / "pool_untrimmed.jsonl");
  write_json_file(sequences_to_json(data.sequences), dir / "homographies.json");
  write_json_file(sidecar_to_json(data), dir / "sidecar.json");
  write_json_file(spec.to_json(), dir / "synth_spec.json");
}

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path, const std::string& pool) {
  const auto j = read_json_file(path);
  if (!j.contains(pool)) throw ValidationError(path.string() + ": no sidecar for pool '" + pool + "'");
  std::vector<SidecarEntry> out;
  for (const auto& e : j.at(pool)) {
    out.push_back({e.at("id").get<std::string>(), e.at("generating_class").get<int>(), e.at("query_class").get<int>()});
  }
  return out;
}

}  // namespace omni
