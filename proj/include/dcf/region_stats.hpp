/**
 * @file region_stats.hpp
 * @brief Weighted feature means, in/out region features, exact distance transforms
 *        and isoline features, with adjoints with respect to the weight fields.
 */

#pragma once

#include "dcf/features.hpp"
#include "dcf/field.hpp"
#include "dcf/geometry.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace dcf {

inline constexpr double kEmptyRegionEps = 1e-8;

/// sum_x w(x) f(x) / sum_x w(x) per channel. Throws EmptyRegion when sum w <= kEmptyRegionEps.
std::vector<double> masked_mean(const ScalarField& weight, const FeatureMap& features);

/// Gradient of dot(cot, masked_mean(w, f)) with respect to w; `mean` is the forward result.
ScalarField masked_mean_vjp(const ScalarField& weight, const FeatureMap& features,
                            const std::vector<double>& mean, const std::vector<double>& cot);

using ScaleVectors = std::array<std::vector<double>, kPyramidScales>;

struct RegionFeatures {
    ScaleVectors in;
    ScaleVectors out;
};

/// Per scale: in = L(M_s, f_s), out = L(1 - M_s, f_s). `masks[s]` must match f_s spatially.
RegionFeatures region_features(const ScaleMaps& masks, const FeaturePyramid& pyramid);
/// Same, with M_s obtained by bilinear downsampling of a scale-0 mask.
RegionFeatures region_features(const ScalarField& mask, const FeaturePyramid& pyramid);

ScaleMaps region_features_vjp(const ScaleMaps& masks, const FeaturePyramid& pyramid,
                              const RegionFeatures& forward, const ScaleVectors& cot_in,
                              const ScaleVectors& cot_out);

/// Exact Euclidean distance (pixels) from every foreground pixel to the nearest background
/// pixel; pixels outside the image count as background. Zero on background.
ScalarField euclidean_distance_transform(const BinaryMask& mask);

/// EDT divided by its maximum. Throws EmptyRegion for an empty mask.
ScalarField mask_to_distance_map(const BinaryMask& mask);

/// sigma_i = gap^2 / (4 ln 4), gap = smaller neighbor spacing (1 for a lone center).
/// Centers must be strictly increasing.
std::vector<double> isoline_sigma(const std::vector<double>& centers);

/// G(d, i, sigma) = exp(-(d - i)^2 / sigma)
inline double isoline_gaussian(double d, double center, double sigma) {
    const double u = d - center;
    return std::exp(-u * u / sigma);
}

struct IsolineSet {
    std::vector<double> centers;
    std::vector<double> sigmas;
    std::vector<ScalarField> fields;
};

IsolineSet isoline_weights(const ScalarField& distance, const std::vector<double>& centers);

/// features[i][s] = f_{i,s}
using IsolineFeatures = std::vector<ScaleVectors>;

/// f_{i,s} = L(downsample(Iso_i, s), f_s). `distance` must match f_0 spatially.
IsolineFeatures isoline_features(const ScalarField& distance, const FeaturePyramid& pyramid,
                                 const std::vector<double>& centers);

/// Gradient of sum_{i,s} dot(cot[i][s], f_{i,s}) with respect to the distance map.
ScalarField isoline_features_vjp(const ScalarField& distance, const FeaturePyramid& pyramid,
                                 const std::vector<double>& centers, const IsolineFeatures& cot);

}  // namespace dcf

