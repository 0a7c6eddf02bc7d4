#pragma once

#include "dcf/contour.hpp"
#include "dcf/field.hpp"

#include <array>

namespace dcf::tools {

/// Copy of `image` with the closed polygon drawn `width_px` wide; contour in normalized coordinates.
Image draw_contour(const Image& image, const Contour& contour, std::array<float, 3> color = {0.1f, 0.9f, 0.2f},
                   double width_px = 2.0);

}  // namespace dcf::tools
