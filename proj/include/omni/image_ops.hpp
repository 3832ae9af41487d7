#pragma once

#include <string_view>

#include "omni/types.hpp"

namespace omni {

/// What bilinear sampling returns outside the frame.
enum class FillPolicy { kConstant, kEdgeClamp };

std::string_view to_string(FillPolicy f);
FillPolicy parse_fill_policy(std::string_view text);

struct Fill {
  FillPolicy policy = FillPolicy::kEdgeClamp;
  float value = 0.0f;  // kConstant only
};

/// Bilinear sample of channel c at continuous pixel coordinates (pixel
/// centres at integers). Coordinates within 1e-9 of an integer are snapped so
/// integer shifts copy pixels exactly.
float bilinear(const Frame& frame, double x, double y, int c, const Fill& fill);

/// Sub-window [x0, x0+w) x [y0, y0+h) resized back to the frame's size.
Frame crop_and_resize(const Frame& frame, int x0, int y0, int w, int h);

}  // namespace omni
