#include "omni/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omni/error.hpp"

namespace omni {

std::string_view to_string(FillPolicy f) {
  return f == FillPolicy::kConstant ? "constant" : "edge-clamp";
}

FillPolicy parse_fill_policy(std::string_view text) {
  if (text == "constant" || text == "zero") return FillPolicy::kConstant;
  if (text == "edge-clamp" || text == "clamp") return FillPolicy::kEdgeClamp;
  throw ValidationError("unknown fill policy '" + std::string(text) + "'");
}

namespace {

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

float texel(const Frame& frame, int x, int y, int c, const Fill& fill) {
  if (x < 0 || y < 0 || x >= frame.width() || y >= frame.height()) {
    if (fill.policy == FillPolicy::kConstant) return fill.value;
    x = std::clamp(x, 0, frame.width() - 1);
    y = std::clamp(y, 0, frame.height() - 1);
  }
  return frame.at(x, y, c);
}

}  // namespace

float bilinear(const Frame& frame, double x, double y, int c, const Fill& fill) {
  // Beyond one pixel outside, every tap is out of bounds; clamping the
  // coordinate there leaves the result unchanged and keeps casts in range.
  const double hi_x = frame.width() + 1.0;
  const double hi_y = frame.height() + 1.0;
  x = std::isfinite(x) ? std::clamp(snap(x), -2.0, hi_x) : -2.0;
  y = std::isfinite(y) ? std::clamp(snap(y), -2.0, hi_y) : -2.0;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  if (ax == 0.0 && ay == 0.0) return texel(frame, x0, y0, c, fill);
  const double v00 = texel(frame, x0, y0, c, fill);
  const double v10 = texel(frame, x0 + 1, y0, c, fill);
  const double v01 = texel(frame, x0, y0 + 1, c, fill);
  const double v11 = texel(frame, x0 + 1, y0 + 1, c, fill);
  const double top = v00 + ax * (v10 - v00);
  const double bottom = v01 + ax * (v11 - v01);
  const double v = top + ay * (bottom - top);
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

Frame crop_and_resize(const Frame& frame, int x0, int y0, int w, int h) {
  if (w <= 0 || h <= 0 || x0 < 0 || y0 < 0 || x0 + w > frame.width() || y0 + h > frame.height()) {
    throw ValidationError("crop window outside the frame");
  }
  Frame out(frame.width(), frame.height(), frame.channels());
  const double sx = static_cast<double>(w) / frame.width();
  const double sy = static_cast<double>(h) / frame.height();
  const Fill clamp{FillPolicy::kEdgeClamp, 0.0f};
  for (int y = 0; y < frame.height(); ++y) {
    const double src_y = std::clamp(y0 + (y + 0.5) * sy - 0.5, static_cast<double>(y0),
                                    static_cast<double>(y0 + h - 1));
    for (int x = 0; x < frame.width(); ++x) {
      const double src_x = std::clamp(x0 + (x + 0.5) * sx - 0.5, static_cast<double>(x0),
                                      static_cast<double>(x0 + w - 1));
      for (int c = 0; c < frame.channels(); ++c) out.at(x, y, c) = bilinear(frame, src_x, src_y, c, clamp);
    }
  }
  return out;
}

}  // namespace omni
