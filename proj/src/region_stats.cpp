#include "dcf/region_stats.hpp"

#include "dcf/error.hpp"
#include "dcf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcf {

namespace {

void check_same_extent(const ScalarField& w, const FeatureMap& f) {
    if (w.height != f.height || w.width != f.width) {
        throw Error(ErrorCode::ShapeMismatch, "weight field and feature map differ in extent");
    }
}

ScalarField one_minus(const ScalarField& m) {
    ScalarField out = m;
    for (auto& v : out.data) v = 1.0 - v;
    return out;
}

}  // namespace

std::vector<double> masked_mean(const ScalarField& weight, const FeatureMap& features) {
    check_same_extent(weight, features);
    const int c = features.channels;
    std::vector<double> acc(c, 0.0);
    double total = 0.0;
    for (std::size_t p = 0; p < weight.size(); ++p) {
        const double w = weight.data[p];
        if (w == 0.0) continue;
        total += w;
        const float* f = features.data.data() + p * c;
        for (int ch = 0; ch < c; ++ch) acc[ch] += w * f[ch];
    }
    if (!(total > kEmptyRegionEps)) throw Error(ErrorCode::EmptyRegion, "empty region");
    for (auto& v : acc) v /= total;
    return acc;
}

ScalarField masked_mean_vjp(const ScalarField& weight, const FeatureMap& features,
                            const std::vector<double>& mean, const std::vector<double>& cot) {
    check_same_extent(weight, features);
    const int c = features.channels;
    double total = 0.0;
    for (double w : weight.data) total += w;
    if (!(total > kEmptyRegionEps)) throw Error(ErrorCode::EmptyRegion, "empty region");
    double offset = 0.0;
    for (int ch = 0; ch < c; ++ch) offset += cot[ch] * mean[ch];
    // d mean / d w(x) = (f(x) - mean) / W
    ScalarField g(weight.height, weight.width);
    for (std::size_t p = 0; p < weight.size(); ++p) {
        const float* f = features.data.data() + p * c;
        double s = -offset;
        for (int ch = 0; ch < c; ++ch) s += cot[ch] * f[ch];
        g.data[p] = s / total;
    }
    return g;
}

RegionFeatures region_features(const ScaleMaps& masks, const FeaturePyramid& pyramid) {
    RegionFeatures r;
    for (int s = 0; s < kPyramidScales; ++s) {
        r.in[s] = masked_mean(masks[s], pyramid[s]);
        r.out[s] = masked_mean(one_minus(masks[s]), pyramid[s]);
    }
    return r;
}

RegionFeatures region_features(const ScalarField& mask, const FeaturePyramid& pyramid) {
    ScaleMaps m;
    for (int s = 0; s < kPyramidScales; ++s) m[s] = resize_bilinear(mask, pyramid[s].height, pyramid[s].width);
    return region_features(m, pyramid);
}

ScaleMaps region_features_vjp(const ScaleMaps& masks, const FeaturePyramid& pyramid,
                              const RegionFeatures& forward, const ScaleVectors& cot_in,
                              const ScaleVectors& cot_out) {
    ScaleMaps g;
    for (int s = 0; s < kPyramidScales; ++s) {
        g[s] = masked_mean_vjp(masks[s], pyramid[s], forward.in[s], cot_in[s]);
        const ScalarField go = masked_mean_vjp(one_minus(masks[s]), pyramid[s], forward.out[s], cot_out[s]);
        for (std::size_t p = 0; p < g[s].size(); ++p) g[s].data[p] -= go.data[p];
    }
    return g;
}

namespace {

constexpr double kFar = 1e20;

/// Lower envelope of parabolas over one line of squared distances. Every line holds
/// at least one zero, so the result is exact in integer arithmetic.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

ScalarField euclidean_distance_transform(const BinaryMask& mask) {
    // One ring of background around the image.
    const int h = mask.height + 2;
    const int w = mask.width + 2;
    std::vector<double> grid(static_cast<std::size_t>(h) * w, 0.0);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c)) grid[static_cast<std::size_t>(r + 1) * w + c + 1] = kFar;

    const int n = std::max(h, w);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = grid[static_cast<std::size_t>(r) * w + c];
        edt_1d(f.data(), d.data(), h, v, z);
        for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = d[r];
    }
    for (int r = 0; r < h; ++r) {
        double* row = &grid[static_cast<std::size_t>(r) * w];
        std::copy(row, row + w, f.begin());
        edt_1d(f.data(), row, w, v, z);
    }

    ScalarField out(mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            out.at(r, c) = std::sqrt(grid[static_cast<std::size_t>(r + 1) * w + c + 1]);
    return out;
}

ScalarField mask_to_distance_map(const BinaryMask& mask) {
    if (mask.count() == 0) throw Error(ErrorCode::EmptyRegion, "empty mask");
    ScalarField d = euclidean_distance_transform(mask);
    const double mx = *std::max_element(d.data.begin(), d.data.end());
    for (auto& v : d.data) v /= mx;
    return d;
}

std::vector<double> isoline_sigma(const std::vector<double>& centers) {
    if (centers.empty()) throw Error(ErrorCode::InvalidArgument, "isoline centers are empty");
    for (std::size_t i = 1; i < centers.size(); ++i) {
        if (!(centers[i] > centers[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "isoline centers must be strictly increasing");
        }
    }
    const double denom = 4.0 * std::log(4.0);
    std::vector<double> sigma(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
        double gap = std::numeric_limits<double>::infinity();
        if (i > 0) gap = std::min(gap, centers[i] - centers[i - 1]);
        if (i + 1 < centers.size()) gap = std::min(gap, centers[i + 1] - centers[i]);
        if (centers.size() == 1) gap = 1.0;
        sigma[i] = gap * gap / denom;
    }
    return sigma;
}

IsolineSet isoline_weights(const ScalarField& distance, const std::vector<double>& centers) {
    IsolineSet set{centers, isoline_sigma(centers), {}};
    for (std::size_t i = 0; i < centers.size(); ++i) {
        ScalarField f(distance.height, distance.width);
        for (std::size_t p = 0; p < f.size(); ++p) f.data[p] = isoline_gaussian(distance.data[p], centers[i], set.sigmas[i]);
        set.fields.push_back(std::move(f));
    }
    return set;
}

IsolineFeatures isoline_features(const ScalarField& distance, const FeaturePyramid& pyramid,
                                 const std::vector<double>& centers) {
    if (distance.height != pyramid[0].height || distance.width != pyramid[0].width) {
        throw Error(ErrorCode::ShapeMismatch, "distance map does not match scale 0 of the pyramid");
    }
    const IsolineSet set = isoline_weights(distance, centers);
    IsolineFeatures out(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (int s = 0; s < kPyramidScales; ++s) {
            const ScalarField w = resize_bilinear(set.fields[i], pyramid[s].height, pyramid[s].width);
            out[i][s] = masked_mean(w, pyramid[s]);
        }
    }
    return out;
}

ScalarField isoline_features_vjp(const ScalarField& distance, const FeaturePyramid& pyramid,
                                 const std::vector<double>& centers, const IsolineFeatures& cot) {
    if (cot.size() != centers.size()) throw Error(ErrorCode::ShapeMismatch, "cotangent/isoline count mismatch");
    const IsolineSet set = isoline_weights(distance, centers);
    ScalarField grad(distance.height, distance.width);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        ScalarField cot_iso(distance.height, distance.width);
        for (int s = 0; s < kPyramidScales; ++s) {
            const ScalarField w = resize_bilinear(set.fields[i], pyramid[s].height, pyramid[s].width);
            const auto mean = masked_mean(w, pyramid[s]);
            const ScalarField gw = masked_mean_vjp(w, pyramid[s], mean, cot[i][s]);
            const ScalarField back = resize_bilinear_adjoint(gw, distance.height, distance.width);
            for (std::size_t p = 0; p < back.size(); ++p) cot_iso.data[p] += back.data[p];
        }
        const double sigma = set.sigmas[i];
        for (std::size_t p = 0; p < grad.size(); ++p) {
            const double g = set.fields[i].data[p];
            grad.data[p] += cot_iso.data[p] * g * (-2.0 * (distance.data[p] - centers[i]) / sigma);
        }
    }
    return grad;
}

}  // namespace dcf
