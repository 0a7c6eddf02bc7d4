/**
 * @file resample.hpp
 * @brief Bilinear resizing with half-pixel-center alignment, its exact adjoint,
 *        and edge-replication padding.
 *
 * Output pixel i samples the input at (i + 0.5) * in / out - 0.5, clamped to the
 * valid range. Halving therefore averages 2x2 blocks, and constants are preserved
 * for any size pair.
 */

#pragma once

#include "dcf/field.hpp"

namespace dcf {

ScalarField resize_bilinear(const ScalarField& src, int out_h, int out_w);
FeatureMap resize_bilinear(const FeatureMap& src, int out_h, int out_w);

/// Transpose of resize_bilinear(., cot.height, cot.width) applied to `cot`.
ScalarField resize_bilinear_adjoint(const ScalarField& cot, int in_h, int in_w);

/// Size of scale s for a base extent: base / 2^s (base must be divisible).
inline int scale_extent(int base, int s) { return base >> s; }

/// Smallest multiple of `multiple` that is >= n.
inline int padded_extent(int n, int multiple = 16) { return (n + multiple - 1) / multiple * multiple; }

ScalarField pad_edge(const ScalarField& src, int out_h, int out_w);
FeatureMap pad_edge(const FeatureMap& src, int out_h, int out_w);
BinaryMask pad_edge(const BinaryMask& src, int out_h, int out_w);
ScalarField crop(const ScalarField& src, int h, int w);

}  // namespace dcf
