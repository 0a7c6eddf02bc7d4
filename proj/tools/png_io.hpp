#pragma once

#include "dcf/field.hpp"

#include <string>

namespace dcf::tools {

/// Any PNG, converted to 8-bit RGB and scaled to [0,1].
Image read_png_rgb(const std::string& path);
/// Gray conversion thresholded at 128.
BinaryMask read_png_mask(const std::string& path);

void write_png_rgb(const std::string& path, const Image& image);
void write_png_mask(const std::string& path, const BinaryMask& mask);

}  // namespace dcf::tools
