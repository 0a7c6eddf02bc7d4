/**
 * @file contour_ops.hpp
 * @brief Per-iteration contour adjustments: loop removal, displacement clipping,
 *        gradient smoothing along the contour, and equidistant resampling.
 */

#pragma once

#include "dcf/contour.hpp"

#include <cstddef>
#include <vector>

namespace dcf {

/// Transversal crossing between non-adjacent edges i < j.
/// Edge e joins node e to node e+1 (mod n).
struct IntersectionEvent {
    std::size_t edge_i = 0;
    std::size_t edge_j = 0;
    Point point;
    double t_i = 0.0;  ///< position along edge i, in (0,1)
    double t_j = 0.0;  ///< position along edge j, in (0,1)
};

/// Bentley-Ottmann sweep over edge endpoints and crossing events.
/// Result is sorted by (edge_i, t_i). Touching and collinear overlaps are not crossings.
std::vector<IntersectionEvent> find_self_intersections(const Contour& contour);

/// True when segments ab and cd cross at a single interior point of both.
bool segments_cross(Point a, Point b, Point c, Point d);

/// Splits the polygon at its crossings and keeps the loop of largest |area|
/// (ties: the loop holding the lowest original node index), counter-clockwise.
/// Returns the input unchanged when it has no crossings.
/// Throws ContourCollapsed when every loop has area < 1e-8.
Contour clean(const Contour& contour);

/// Rescales each node vector whose norm exceeds max_norm to exactly max_norm.
ContourGradient clip_gradient(const ContourGradient& grad, double max_norm);

/// Periodic Gaussian smoothing over node index (std sigma_nodes, truncated at 3 sigma).
ContourGradient blur_gradient(const ContourGradient& grad, double sigma_nodes);

/// n_nodes points at equal arc-length spacing from node 0, counter-clockwise.
/// Throws DegenerateContour for zero perimeter.
Contour resample_equidistant(const Contour& contour, std::size_t n_nodes);

}  // namespace dcf
