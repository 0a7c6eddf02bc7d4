/**
 * @file geometry.hpp
 * @brief Differentiable contour-to-mask and contour-to-distance-map kernels.
 *
 * The soft mask at a point x is the winding sum of tanh-signed edge angles,
 * divided by 2*pi: ~1 inside a counter-clockwise polygon, ~0 outside. The soft
 * distance map multiplies it by the distance to the nearest node and normalizes
 * by the grid maximum. Every kernel has a hand-written vector-Jacobian product
 * with respect to the node positions.
 */

#pragma once

#include "dcf/contour.hpp"
#include "dcf/field.hpp"

#include <array>
#include <cstddef>
#include <utility>

namespace dcf {

inline constexpr double kAcosEps = 1e-7;
inline constexpr double kPointEps = 1e-12;
inline constexpr double kMaxEps = 1e-12;
inline constexpr double kDefaultSharpness = 1e5;
inline constexpr int kNumScales = 5;

/// Sample grid: `height` x `width` cells, cell (i, j) centered at
/// ((j + 0.5) * pitch_x, (i + 0.5) * pitch_y) in normalized coordinates.
struct PixelGrid {
    int height = 0;
    int width = 0;
    double pitch_x = 0.0;
    double pitch_y = 0.0;

    /// One cell per pixel of an H x W image.
    static PixelGrid unit(int h, int w);

    Point center(int row, int col) const { return {(col + 0.5) * pitch_x, (row + 0.5) * pitch_y}; }
};

/// u(a,b,x) * theta(a,b,x): tanh(k * cross(a-x, b-x)) times the unsigned angle at x.
/// Returns 0 when x is within kPointEps of a or b.
double oriented_angle(Point a, Point b, Point x, double k);

ScalarField contour_to_mask(const Contour& contour, const PixelGrid& grid, double k);

/// sum_x cotangent(x) * dM(x)/dC
ContourGradient contour_to_mask_vjp(const Contour& contour, const PixelGrid& grid, double k,
                                    const ScalarField& cotangent);

struct NearestNode {
    double distance = 0.0;
    std::size_t index = 0;
};

/// Distance to the closest node (not segment); ties go to the lowest index.
NearestNode min_node_distance(Point x, const Contour& contour);

/// F_cm * d2 / max(F_cm * d2). Throws DegenerateContour when the maximum is <= kMaxEps.
ScalarField contour_to_distance_map(const Contour& contour, const PixelGrid& grid, double k);

ContourGradient contour_to_distance_map_vjp(const Contour& contour, const PixelGrid& grid,
                                            double k, const ScalarField& cotangent);

/// |shoelace area| in normalized units^2.
double polygon_area(const Contour& contour);
/// d|Area|/dC; zero for degenerate polygons.
ContourGradient polygon_area_gradient(const Contour& contour);

enum class MapKind { Mask, Distance };

using ScaleMaps = std::array<ScalarField, kNumScales>;

/// Evaluates the kernel once on a mesh at `mesh_scale` and resamples it to the five
/// pyramid scales of the padded image (extent rounded up to a multiple of 16).
/// mesh_scale = 0 is the exact mode. Coordinates stay normalized to the
/// unpadded image_h x image_w frame.
ScaleMaps multiscale_maps(const Contour& contour, int image_h, int image_w, double k,
                          int mesh_scale, MapKind kind);

ContourGradient multiscale_maps_vjp(const Contour& contour, int image_h, int image_w, double k,
                                    int mesh_scale, MapKind kind, const ScaleMaps& cotangents);

/// Mesh grid used by multiscale_maps.
PixelGrid mesh_grid(int image_h, int image_w, int mesh_scale);

}  // namespace dcf
