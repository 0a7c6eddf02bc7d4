/**
 * @file evolution.hpp
 * @brief The unsupervised and one-shot contour evolution loops, their losses and
 *        gradients, support signatures and the similarity score.
 */

#pragma once

#include "dcf/contour.hpp"
#include "dcf/features.hpp"
#include "dcf/region_stats.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dcf {

struct EvolutionConfig {
    std::size_t n_nodes = 100;
    double k = 1e5;
    double l_r = 1e-2;
    double e_d = 0.999;
    /// Stop once |grad| <= t * |grad at epoch 0| (global L2 norms).
    double t = 1e-2;
    int n_epochs = 70;
    double lambda_area = 0.0;
    bool use_clip = true;
    double clip_max_norm = 1.0;
    bool use_blur = false;
    double blur_sigma = 2.0;
    std::vector<double> isoline_centers{0.0, 1.0};
    std::vector<double> isoline_weights{0.1, 0.9};
    int n_aug = 100;
    int mesh_scale = 2;
    /// predict_query scales C0 about its node centroid by this factor first.
    double init_dilation = 1.0;
    std::uint64_t seed = 0;
    /// Snapshot every N epochs in the trace (0 = none).
    int snapshot_stride = 0;

    /// Throws InvalidArgument on the first violated invariant.
    void validate() const;

    static EvolutionConfig unsupervised_histology();
    static EvolutionConfig unsupervised_real_life();
    static EvolutionConfig oneshot();
};

/// Scales the nodes about their mean by `factor`, clamped to the unit square.
Contour dilate_about_centroid(const Contour& c, double factor);

std::string config_to_json(const EvolutionConfig& c);
/// Missing keys keep the values of `base`.
EvolutionConfig config_from_json(const std::string& text, const EvolutionConfig& base = {});
/// FNV-1a of the canonical JSON form.
std::string config_hash(const EvolutionConfig& c);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double step_size = 0.0;  // l_r * e_d^epoch
    double area = 0.0;
    std::optional<Contour> snapshot;
};

struct EvolutionTrace {
    std::vector<EpochRecord> epochs;
    bool converged = false;  // stopped by the gradient-norm criterion
    bool degenerate = false;
    std::string failure;
};

struct Objective {
    double loss = 0.0;
    ContourGradient grad;
};

/// -sum_s 2^-s |in_s - out_s| / |f_s|_F - lambda_area * area
double loss_unsupervised(const RegionFeatures& rf, const std::array<double, kPyramidScales>& norms,
                         double area, double lambda_area);

/// loss_1 and its gradient with respect to the nodes.
Objective unsupervised_objective(const Contour& c, const FeaturePyramid& pyramid, const EvolutionConfig& cfg);

/// Descent direction: the gradient scaled so its largest node norm is 1, making l_r the
/// largest node displacement per epoch in normalized units.
ContourGradient normalized_direction(const ContourGradient& grad);

/// Unsupervised loop: descend loss_1, then Clip, Clean and Interp each epoch. Degenerate
/// geometry ends the run early with the flag set in the trace.
std::pair<Contour, EvolutionTrace> evolve_unsupervised(const FeaturePyramid& pyramid, const Contour& init,
                                                       const EvolutionConfig& cfg);

/// Applies, in order: rot90 (k uniform in 1..3) with p = 0.5, hflip p = 0.5, vflip p = 0.5.
struct Augmentation {
    int rot90 = 0;  // counter-clockwise quarter turns
    bool hflip = false;
    bool vflip = false;
};

Augmentation draw_augmentation(std::mt19937_64& rng);
Image apply_augmentation(const Image& image, const Augmentation& a);
BinaryMask apply_augmentation(const BinaryMask& mask, const Augmentation& a);
std::pair<Image, BinaryMask> random_augmentation(const Image& image, const BinaryMask& mask,
                                                 std::mt19937_64& rng);

struct SupportSignature {
    std::vector<double> centers;
    std::vector<double> weights;
    IsolineFeatures isolines;   // [i][s]
    ScaleVectors in_means;      // [f_s^sup]^in from the hard mask
    std::string config_hash;
    int used_augmentations = 0;
};

/// Normalized distance map of `mask`, zero-padded to the pyramid's scale-0 extent.
ScalarField support_distance_map(const BinaryMask& mask, const FeaturePyramid& pyramid);

/// One-shot fit: isoline features averaged over n_aug seeded augmentations.
SupportSignature fit_support(const Image& image, const BinaryMask& mask, const Extractor& extractor,
                             const EvolutionConfig& cfg);

/// (1/(|S||I|)) sum_s sum_i (w_i / 2^s) |sup - qu| / c_s
double loss_oneshot(const SupportSignature& sig, const IsolineFeatures& query);

Objective oneshot_objective(const Contour& c, const SupportSignature& sig, const FeaturePyramid& pyramid,
                            const EvolutionConfig& cfg);

/// sum_s 2^-s cos(sup_in_s, query_in_s); cos = 0 when either norm < 1e-12.
double similarity_score(const ScaleVectors& support_in, const ScaleVectors& query_in);
/// Score of the region under a soft mask given at the padded scale-0 extent.
double similarity_score(const SupportSignature& sig, const FeaturePyramid& pyramid, const ScalarField& mask);

struct Prediction {
    Contour contour;
    double score = 0.0;
    bool rejected = false;
    EvolutionTrace trace;
};

/// One-shot predict: dilate C0 by init_dilation, descend loss_2 with Blur, then
/// score the final region.
Prediction predict_query(const SupportSignature& sig, const FeaturePyramid& pyramid, const Contour& init,
                         const EvolutionConfig& cfg);

// Signature files: DCFW tensors "iso.<i>.<s>" and "inmean.<s>" at `path`, JSON sidecar at path + ".json".
void save_signature(const SupportSignature& sig, const std::string& path);
SupportSignature load_signature(const std::string& path);

}  // namespace dcf
