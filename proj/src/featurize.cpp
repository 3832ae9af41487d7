#include "omni/featurize.hpp"

#include <cmath>
#include <string>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {

std::string_view to_string(Consensus c) {
  return c == Consensus::kStackK ? "stack-k" : "segment-average";
}

Consensus parse_consensus(std::string_view text) {
  if (text == "segment-average" || text == "2d") return Consensus::kSegmentAverage;
  if (text == "stack-k" || text == "3d") return Consensus::kStackK;
  throw ValidationError("unknown consensus '" + std::string(text) + "'");
}

std::vector<double> frame_features(const Frame& frame, int grid) {
  if (grid < 1) throw ValidationError("featurizer grid must be >= 1");
  const int w = frame.width();
  const int h = frame.height();
  std::vector<double> out(static_cast<std::size_t>(grid) * grid + 4, 0.0);

  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * h / grid;
    const int y1 = std::max((gy + 1) * h / grid, y0 + 1);
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * w / grid;
      const int x1 = std::max((gx + 1) * w / grid, x0 + 1);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += frame.intensity(x, y);
      }
      out[static_cast<std::size_t>(gy) * grid + gx] = sum / ((y1 - y0) * (x1 - x0));
    }
  }

  const double n = static_cast<double>(w) * h;
  double mean = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) mean += frame.intensity(x, y);
  }
  mean /= n;
  double var = 0.0;
  double gx_sum = 0.0;
  double gy_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = frame.intensity(x, y);
      var += (v - mean) * (v - mean);
      if (x + 1 < w) gx_sum += std::abs(frame.intensity(x + 1, y) - v);
      if (y + 1 < h) gy_sum += std::abs(frame.intensity(x, y + 1) - v);
    }
  }
  const std::size_t base = static_cast<std::size_t>(grid) * grid;
  out[base + 0] = mean;
  out[base + 1] = std::sqrt(var / n);
  out[base + 2] = w > 1 ? gx_sum / (static_cast<double>(w - 1) * h) : 0.0;
  out[base + 3] = h > 1 ? gy_sum / (static_cast<double>(h - 1) * w) : 0.0;
  return out;
}

std::vector<std::size_t> stack_indices(std::size_t frame_count, int k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    idx[i] = (2 * static_cast<std::size_t>(i) + 1) * frame_count / (2 * static_cast<std::size_t>(k));
  }
  return idx;
}

FeatureVector featurize_frames(std::span<const Frame> frames, const FeaturizerConfig& config) {
  if (frames.empty()) throw ValidationError("cannot featurize a sample with no frames");
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front())) throw ValidationError("frames of one sample differ in shape");
  }
  FeatureVector fv;
  if (config.consensus == Consensus::kSegmentAverage) {
    fv.values.assign(config.frame_dims(), 0.0);
    for (const auto& f : frames) {
      const auto ff = frame_features(f, config.grid);
      for (std::size_t d = 0; d < ff.size(); ++d) fv.values[d] += ff[d];
    }
    for (double& v : fv.values) v /= static_cast<double>(frames.size());
  } else {
    if (config.stack_k < 1) throw ValidationError("stack-k needs k >= 1");
    fv.values.reserve(config.dims());
    for (std::size_t i : stack_indices(frames.size(), config.stack_k)) {
      const auto ff = frame_features(frames[i], config.grid);
      fv.values.insert(fv.values.end(), ff.begin(), ff.end());
    }
  }
  return fv;
}

FeatureVector featurize(const Sample& sample, const FeaturizerConfig& config) {
  if (sample.frames.empty()) {
    throw ValidationError("sample '" + sample.id + "' has no frames to featurize");
  }
  try {
    return featurize_frames(sample.frames, config);
  } catch (const ValidationError& e) {
    throw ValidationError("sample '" + sample.id + "': " + e.what());
  }
}

Manifest featurize_manifest(const Manifest& manifest, const FeaturizerConfig& config) {
  Manifest out = manifest;
  parallel_for(out.samples.size(), [&](std::size_t i) {
    out.samples[i].feature = featurize(out.samples[i], config);
  });
  out.feature_dims = config.dims();
  return out;
}

}  // namespace omni
