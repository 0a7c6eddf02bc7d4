#include "dcf/synthetic.hpp"

#include "dcf/error.hpp"
#include "dcf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dcf {

namespace {

constexpr float kLumen[3] = {0.96f, 0.95f, 0.97f};
constexpr float kStroma[3] = {0.91f, 0.68f, 0.80f};
constexpr float kEpithelium[3] = {0.80f, 0.50f, 0.68f};
constexpr float kNucleus[3] = {0.30f, 0.18f, 0.45f};

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

void fill_disk(Image& img, double cy, double cx, double r, const float* rgb, float mix = 1.0f) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
    const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + r + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
    const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + r + 1)));
    for (int i = r0; i <= r1; ++i)
        for (int j = c0; j <= c1; ++j) {
            const double dy = i + 0.5 - cy, dx = j + 0.5 - cx;
            if (dy * dy + dx * dx >= r * r) continue;
            for (int c = 0; c < 3; ++c) img.at(i, j, c) = (1 - mix) * img.at(i, j, c) + mix * rgb[c];
        }
}

}  // namespace

BinaryMask disk_mask(int h, int w, double cy, double cx, double radius) {
    BinaryMask m(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double dy = i + 0.5 - cy, dx = j + 0.5 - cx;
            m.at(i, j) = dy * dy + dx * dx < radius * radius;
        }
    return m;
}

Image disk_image(int h, int w, double cy, double cx, double radius, float bg, float fg) {
    const BinaryMask m = disk_mask(h, w, cy, cx, radius);
    Image img(h, w, 3, bg);
    for (std::size_t p = 0; p < m.data.size(); ++p)
        if (m.data[p])
            for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = fg;
    return img;
}

Image pink_texture(std::mt19937_64& rng, int h, int w) {
    const int gh = std::max(2, h / 6), gw = std::max(2, w / 6);
    ScalarField coarse(gh, gw);
    for (auto& v : coarse.data) v = unit(rng) - 0.5;
    const ScalarField noise = resize_bilinear(coarse, h, w);
    Image img(h, w, 3);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double n = 0.02 * noise.at(i, j) + 0.05 * (unit(rng) - 0.5);
            for (int c = 0; c < 3; ++c) img.at(i, j, c) = static_cast<float>(std::clamp(kStroma[c] + n, 0.0, 1.0));
        }
    return img;
}

SyntheticObject paint_object(Image& image, std::mt19937_64& rng, double cy, double cx, bool tubule,
                             const TubuleParams& p) {
    SyntheticObject obj;
    obj.tubule = tubule;
    obj.cy = cy + p.center_jitter * (2 * unit(rng) - 1);
    obj.cx = cx + p.center_jitter * (2 * unit(rng) - 1);
    const double scale = 1.0 + p.radius_jitter * (2 * unit(rng) - 1);
    obj.lumen_radius = p.lumen_radius * scale;
    const double outer = p.outer_radius * scale;
    if (tubule) {
        fill_disk(image, obj.cy, obj.cx, outer, kEpithelium);
        const double ring = 0.5 * (obj.lumen_radius + outer);
        const double phase = 2 * std::numbers::pi * unit(rng);
        for (int k = 0; k < p.n_nuclei; ++k) {
            const double a = phase + 2 * std::numbers::pi * (k + 0.3 * (unit(rng) - 0.5)) / p.n_nuclei;
            const double rr = ring + 0.8 * (unit(rng) - 0.5);
            fill_disk(image, obj.cy + rr * std::sin(a), obj.cx + rr * std::cos(a), p.nucleus_radius, kNucleus);
        }
    }
    fill_disk(image, obj.cy, obj.cx, obj.lumen_radius, kLumen);
    obj.lumen = disk_mask(image.height, image.width, obj.cy, obj.cx, obj.lumen_radius);
    obj.mask = tubule ? disk_mask(image.height, image.width, obj.cy, obj.cx, outer) : obj.lumen;
    return obj;
}

std::pair<Image, SyntheticObject> tubule_patch(std::mt19937_64& rng, int size, bool tubule, const TubuleParams& params) {
    if (size < 8) throw Error(ErrorCode::InvalidArgument, "tubule_patch: size too small");
    Image img = pink_texture(rng, size, size);
    SyntheticObject obj = paint_object(img, rng, size / 2.0, size / 2.0, tubule, params);
    return {std::move(img), std::move(obj)};
}

SyntheticOverview synthetic_overview(std::mt19937_64& rng, int h, int w, int n_tubules, int n_blobs,
                                     const TubuleParams& params) {
    SyntheticOverview ov;
    ov.image = Image(h, w, 3, 1.0f);
    const int border = std::max(4, std::min(h, w) / 16);
    const Image tissue = pink_texture(rng, h, w);
    for (int i = border; i < h - border; ++i)
        for (int j = border; j < w - border; ++j)
            for (int c = 0; c < 3; ++c) ov.image.at(i, j, c) = tissue.at(i, j, c);

    const int total = n_tubules + n_blobs;
    if (total == 0) return ov;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
    const int rows = (total + cols - 1) / cols;
    const double cell_h = static_cast<double>(h - 2 * border) / rows;
    const double cell_w = static_cast<double>(w - 2 * border) / cols;
    if (std::min(cell_h, cell_w) < 2.4 * params.outer_radius) {
        throw Error(ErrorCode::InvalidArgument, "synthetic_overview: image too small for the requested objects");
    }
    std::vector<bool> kinds(total);
    for (int k = 0; k < total; ++k) kinds[k] = k < n_tubules;
    std::shuffle(kinds.begin(), kinds.end(), rng);
    for (int k = 0; k < total; ++k) {
        const double cy = border + (k / cols + 0.5) * cell_h;
        const double cx = border + (k % cols + 0.5) * cell_w;
        ov.objects.push_back(paint_object(ov.image, rng, cy, cx, kinds[k], params));
    }
    return ov;
}

}  // namespace dcf
