/**
 * @file pipeline.hpp
 * @brief Patch-level machinery around the one-shot loop: Macenko stain normalization,
 *        tissue detection, candidate extraction from an overview, score thresholding and
 *        instance metrics (Dice, panoptic quality).
 */

#pragma once

#include "dcf/contour.hpp"
#include "dcf/field.hpp"

#include <array>
#include <string>
#include <vector>

namespace dcf {

/// Stain matrix columns (hematoxylin, eosin) in log10 optical density, and the 99th
/// percentile concentrations of the reference slide.
struct StainReference {
    std::array<std::array<double, 2>, 3> he{{{0.5626, 0.2159}, {0.7201, 0.8012}, {0.4062, 0.5581}}};
    std::array<double, 2> max_concentration{0.8558, 0.4477};
};

struct MacenkoParams {
    double od_threshold = 0.15;
    double alpha_percentile = 1.0;
    int min_tissue_pixels = 100;
};

/// Throws InsufficientTissue when fewer than min_tissue_pixels pixels have |OD| > od_threshold.
Image macenko_normalize(const Image& image, const StainReference& ref = {}, const MacenkoParams& params = {});

/// Reconstruction 10^(-HE * c) for per-pixel concentrations (H, E).
Image stain_compose(const std::vector<std::array<double, 2>>& concentrations, int h, int w,
                    const StainReference& ref = {});

ScalarField grayscale(const Image& image);

/// saturation > 0.05 or gray < 0.85, then a 3x3 closing.
BinaryMask tissue_mask(const Image& image);

/// Tissue plus every non-tissue region not connected to the image border.
BinaryMask fill_holes(const BinaryMask& mask);

/// Linear-interpolated percentile (0..100) of `values`.
double percentile(std::vector<double> values, double p);

struct CandidateConfig {
    double percentile = 90.0;
    double margin_frac = 0.25;
    int min_cc_px = 20;
    std::size_t n_nodes = 100;
};

struct Candidate {
    // Half-open box [row0, row1) x [col0, col1) in overview pixels, margin included.
    int row0 = 0;
    int col0 = 0;
    int row1 = 0;
    int col1 = 0;
    double margin = 0.0;
    Contour contour;  // normalized to the box frame
    int cc_id = 0;
};

/// Square-tracing boundary of the 4-connected component containing `start`
/// (the component's first pixel in raster order). Returns (row, col) pixels in order.
std::vector<std::array<int, 2>> trace_boundary(const BinaryMask& component, int start_row, int start_col);

/// Bright components inside the tissue; sorted by (row0, col0).
std::vector<Candidate> extract_candidates(const Image& overview, const CandidateConfig& cfg = {});

Image crop(const Image& image, int row0, int col0, int row1, int col1);

struct ThresholdChoice {
    double threshold = 0.0;
    double f1 = 0.0;
};

/// Sweeps (min - 1) and every midpoint between sorted unique scores; positive iff
/// score > threshold; maximal F1, ties to the lowest threshold.
ThresholdChoice choose_threshold(const std::vector<double>& scores, const std::vector<bool>& labels);

double f1_at(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold);

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dice(const BinaryMask& a, const BinaryMask& b);
double iou(const BinaryMask& a, const BinaryMask& b);

struct InstancePair {
    int pred = 0;
    int gt = 0;
    double iou = 0.0;
    double dice = 0.0;
};

struct PanopticResult {
    double pq = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double dice_mean = 0.0;  // over matched pairs
    std::vector<InstancePair> matches;
    std::vector<int> false_positives;
    std::vector<int> false_negatives;
};

/// Matches are pairs with IoU > 0.5. Both sets empty gives every score 1.
PanopticResult panoptic_quality(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt);

std::string candidates_to_json(const std::vector<Candidate>& candidates);
std::string metrics_to_json(const PanopticResult& r);

}  // namespace dcf
