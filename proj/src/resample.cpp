#include "dcf/resample.hpp"

#include "dcf/error.hpp"

#include <algorithm>
#include <cmath>

namespace dcf {

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

namespace {

/// Two-tap interpolation along one axis.
struct Tap {
    int i0;
    int i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> make_taps(int in, int out) {
    std::vector<Tap> taps(out);
    const double ratio = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double src = (i + 0.5) * ratio - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const int i0 = static_cast<int>(std::floor(src));
        const int i1 = std::min(i0 + 1, in - 1);
        taps[i] = {i0, i1, src - i0};
    }
    return taps;
}

void check_sizes(int in_h, int in_w, int out_h, int out_w) {
    if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) {
        throw Error(ErrorCode::InvalidArgument, "resize: empty extent");
    }
}

}  // namespace

ScalarField resize_bilinear(const ScalarField& src, int out_h, int out_w) {
    check_sizes(src.height, src.width, out_h, out_w);
    if (out_h == src.height && out_w == src.width) return src;
    const auto ty = make_taps(src.height, out_h);
    const auto tx = make_taps(src.width, out_w);
    ScalarField dst(out_h, out_w);
    for (int i = 0; i < out_h; ++i) {
        const Tap& a = ty[i];
        const double* r0 = &src.data[static_cast<std::size_t>(a.i0) * src.width];
        const double* r1 = &src.data[static_cast<std::size_t>(a.i1) * src.width];
        for (int j = 0; j < out_w; ++j) {
            const Tap& b = tx[j];
            const double top = r0[b.i0] + b.w1 * (r0[b.i1] - r0[b.i0]);
            const double bot = r1[b.i0] + b.w1 * (r1[b.i1] - r1[b.i0]);
            dst.at(i, j) = top + a.w1 * (bot - top);
        }
    }
    return dst;
}

FeatureMap resize_bilinear(const FeatureMap& src, int out_h, int out_w) {
    check_sizes(src.height, src.width, out_h, out_w);
    if (out_h == src.height && out_w == src.width) return src;
    const auto ty = make_taps(src.height, out_h);
    const auto tx = make_taps(src.width, out_w);
    const int c = src.channels;
    FeatureMap dst(out_h, out_w, c);
    for (int i = 0; i < out_h; ++i) {
        const Tap& a = ty[i];
        for (int j = 0; j < out_w; ++j) {
            const Tap& b = tx[j];
            const float* p00 = src.pixel(a.i0, b.i0);
            const float* p01 = src.pixel(a.i0, b.i1);
            const float* p10 = src.pixel(a.i1, b.i0);
            const float* p11 = src.pixel(a.i1, b.i1);
            for (int ch = 0; ch < c; ++ch) {
                const double top = p00[ch] + b.w1 * (static_cast<double>(p01[ch]) - p00[ch]);
                const double bot = p10[ch] + b.w1 * (static_cast<double>(p11[ch]) - p10[ch]);
                dst.at(i, j, ch) = static_cast<float>(top + a.w1 * (bot - top));
            }
        }
    }
    return dst;
}

ScalarField resize_bilinear_adjoint(const ScalarField& cot, int in_h, int in_w) {
    check_sizes(in_h, in_w, cot.height, cot.width);
    if (cot.height == in_h && cot.width == in_w) return cot;
    const auto ty = make_taps(in_h, cot.height);
    const auto tx = make_taps(in_w, cot.width);
    ScalarField dst(in_h, in_w);
    for (int i = 0; i < cot.height; ++i) {
        const Tap& a = ty[i];
        for (int j = 0; j < cot.width; ++j) {
            const Tap& b = tx[j];
            const double g = cot.at(i, j);
            const double g0 = g * (1.0 - a.w1);
            const double g1 = g * a.w1;
            dst.at(a.i0, b.i0) += g0 * (1.0 - b.w1);
            dst.at(a.i0, b.i1) += g0 * b.w1;
            dst.at(a.i1, b.i0) += g1 * (1.0 - b.w1);
            dst.at(a.i1, b.i1) += g1 * b.w1;
        }
    }
    return dst;
}

ScalarField pad_edge(const ScalarField& src, int out_h, int out_w) {
    if (out_h < src.height || out_w < src.width) {
        throw Error(ErrorCode::InvalidArgument, "pad_edge: target smaller than source");
    }
    ScalarField dst(out_h, out_w);
    for (int i = 0; i < out_h; ++i) {
        const int si = std::min(i, src.height - 1);
        for (int j = 0; j < out_w; ++j) dst.at(i, j) = src.at(si, std::min(j, src.width - 1));
    }
    return dst;
}

FeatureMap pad_edge(const FeatureMap& src, int out_h, int out_w) {
    if (out_h < src.height || out_w < src.width) {
        throw Error(ErrorCode::InvalidArgument, "pad_edge: target smaller than source");
    }
    if (out_h == src.height && out_w == src.width) return src;
    FeatureMap dst(out_h, out_w, src.channels);
    for (int i = 0; i < out_h; ++i) {
        const int si = std::min(i, src.height - 1);
        for (int j = 0; j < out_w; ++j) {
            const float* p = src.pixel(si, std::min(j, src.width - 1));
            std::copy(p, p + src.channels, &dst.at(i, j, 0));
        }
    }
    return dst;
}

BinaryMask pad_edge(const BinaryMask& src, int out_h, int out_w) {
    if (out_h < src.height || out_w < src.width) {
        throw Error(ErrorCode::InvalidArgument, "pad_edge: target smaller than source");
    }
    BinaryMask dst(out_h, out_w);
    for (int i = 0; i < out_h; ++i) {
        const int si = std::min(i, src.height - 1);
        for (int j = 0; j < out_w; ++j) dst.at(i, j) = src.at(si, std::min(j, src.width - 1));
    }
    return dst;
}

ScalarField crop(const ScalarField& src, int h, int w) {
    ScalarField dst(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) dst.at(i, j) = src.at(i, j);
    return dst;
}

}  // namespace dcf
