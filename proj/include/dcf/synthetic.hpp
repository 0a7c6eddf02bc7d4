/**
 * @file synthetic.hpp
 * @brief Synthetic test images: flat disks and stained-tissue-like "tubules" (white
 *        lumen inside a ring of dark nuclei on pink texture) with exact ground truth.
 */

#pragma once

#include "dcf/contour.hpp"
#include "dcf/field.hpp"

#include <random>
#include <vector>

namespace dcf {

/// Pixel-unit disk test: (r - cy)^2 + (c - cx)^2 < radius^2 at pixel centers.
BinaryMask disk_mask(int h, int w, double cy, double cx, double radius);

/// Gray `bg` image with a `fg` disk; center and radius in pixels.
Image disk_image(int h, int w, double cy, double cx, double radius, float bg, float fg);

struct TubuleParams {
    double lumen_radius = 8.0;  // pixels
    double outer_radius = 17.0;
    int n_nuclei = 12;
    double nucleus_radius = 2.6;
    double center_jitter = 1.5;
    double radius_jitter = 0.08;  // relative
};

struct SyntheticObject {
    BinaryMask mask;   // object extent (outer boundary for tubules, the blob itself otherwise)
    BinaryMask lumen;  // white area
    double cy = 0.0;
    double cx = 0.0;
    double lumen_radius = 0.0;
    bool tubule = false;
};

/// Smooth pink stroma texture.
Image pink_texture(std::mt19937_64& rng, int h, int w);

/// Paints a tubule (tubule = true) or a bare white blob of lumen size at (cy, cx).
SyntheticObject paint_object(Image& image, std::mt19937_64& rng, double cy, double cx, bool tubule,
                             const TubuleParams& params = {});

/// size x size patch with one centered object.
std::pair<Image, SyntheticObject> tubule_patch(std::mt19937_64& rng, int size, bool tubule,
                                               const TubuleParams& params = {});

struct SyntheticOverview {
    Image image;
    std::vector<SyntheticObject> objects;
};

/// Pink tissue field inside a white border with the given objects on a jittered grid.
SyntheticOverview synthetic_overview(std::mt19937_64& rng, int h, int w, int n_tubules, int n_blobs,
                                     const TubuleParams& params = {});

}  // namespace dcf
