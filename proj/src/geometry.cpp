#include "dcf/geometry.hpp"

#include "dcf/error.hpp"
#include "dcf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace dcf {

namespace {

constexpr double kInvTwoPi = 0.5 / std::numbers::pi;

/// Node offsets from a sample point and their norms.
struct Offsets {
    std::vector<Point> d;
    std::vector<double> len;

    explicit Offsets(std::size_t n) : d(n), len(n) {}

    void fill(const Contour& c, Point x) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            d[i] = c[i] - x;
            len[i] = std::hypot(d[i].x, d[i].y);
        }
    }
};

double angle_term(Point p, double np, Point q, double nq, double k) {
    if (np < kPointEps || nq < kPointEps) return 0.0;
    const double c = std::clamp(dot(p, q) / (np * nq), -1.0 + kAcosEps, 1.0 - kAcosEps);
    return std::tanh(k * cross(p, q)) * std::acos(c);
}

/// Adds s * d(term)/dp to gp and s * d(term)/dq to gq.
void angle_term_grad(Point p, double np, Point q, double nq, double k, double s, Point& gp,
                     Point& gq) {
    if (np < kPointEps || nq < kPointEps) return;
    const double inv = 1.0 / (np * nq);
    const double raw = dot(p, q) * inv;
    const double lo = -1.0 + kAcosEps;
    const double hi = 1.0 - kAcosEps;
    const double c = std::clamp(raw, lo, hi);
    const double theta = std::acos(c);
    const double u = std::tanh(k * cross(p, q));
    const double du = k * (1.0 - u * u) * theta * s;  // d/d(cross)
    gp.x += du * q.y;
    gp.y -= du * q.x;
    gq.x -= du * p.y;
    gq.y += du * p.x;
    if (raw <= lo || raw >= hi) return;
    const double dth = -u * s / std::sqrt(1.0 - c * c);  // d/d(cos)
    const double ap = raw / (np * np);
    const double aq = raw / (nq * nq);
    gp.x += dth * (q.x * inv - ap * p.x);
    gp.y += dth * (q.y * inv - ap * p.y);
    gq.x += dth * (p.x * inv - aq * q.x);
    gq.y += dth * (p.y * inv - aq * q.y);
}

double mask_at(const Offsets& o, std::size_t n, double k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + 1 == n ? 0 : i + 1;
        acc += angle_term(o.d[i], o.len[i], o.d[j], o.len[j], k);
    }
    return acc * kInvTwoPi;
}

void check_grid(const PixelGrid& grid) {
    if (grid.height < 1 || grid.width < 1) {
        throw Error(ErrorCode::InvalidArgument, "pixel grid must be at least 1x1");
    }
}

void check_cotangent(const PixelGrid& grid, const ScalarField& cot) {
    if (cot.height != grid.height || cot.width != grid.width) {
        throw Error(ErrorCode::ShapeMismatch, "cotangent shape differs from grid");
    }
}

/// Forward pieces of the distance map kept for the adjoint.
struct DistanceForward {
    ScalarField mask;
    ScalarField nearest;
    std::vector<std::size_t> argmin;
    ScalarField product;
    std::size_t argmax = 0;
    double max_value = 0.0;
};

DistanceForward distance_forward(const Contour& contour, const PixelGrid& grid, double k) {
    check_grid(grid);
    DistanceForward f{ScalarField(grid.height, grid.width), ScalarField(grid.height, grid.width),
                      std::vector<std::size_t>(static_cast<std::size_t>(grid.height) * grid.width),
                      ScalarField(grid.height, grid.width), 0, -1.0};
    const std::size_t n = contour.size();
    Offsets o(n);
    std::size_t idx = 0;
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c, ++idx) {
            o.fill(contour, grid.center(r, c));
            const double m = mask_at(o, n, k);
            std::size_t best = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (o.len[i] < o.len[best]) best = i;
            f.mask.data[idx] = m;
            f.nearest.data[idx] = o.len[best];
            f.argmin[idx] = best;
            const double g = m * o.len[best];
            f.product.data[idx] = g;
            if (g > f.max_value) {
                f.max_value = g;
                f.argmax = idx;
            }
        }
    }
    if (f.max_value <= kMaxEps) {
        throw Error(ErrorCode::DegenerateContour, "contour encloses no pixel");
    }
    return f;
}

}  // namespace

PixelGrid PixelGrid::unit(int h, int w) {
    return {h, w, 1.0 / w, 1.0 / h};
}

double oriented_angle(Point a, Point b, Point x, double k) {
    const Point p = a - x;
    const Point q = b - x;
    return angle_term(p, norm(p), q, norm(q), k);
}

ScalarField contour_to_mask(const Contour& contour, const PixelGrid& grid, double k) {
    check_grid(grid);
    ScalarField out(grid.height, grid.width);
    const std::size_t n = contour.size();
    Offsets o(n);
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            o.fill(contour, grid.center(r, c));
            out.at(r, c) = mask_at(o, n, k);
        }
    }
    return out;
}

ContourGradient contour_to_mask_vjp(const Contour& contour, const PixelGrid& grid, double k,
                                    const ScalarField& cotangent) {
    check_grid(grid);
    check_cotangent(grid, cotangent);
    const std::size_t n = contour.size();
    ContourGradient g(n);
    Offsets o(n);
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const double w = cotangent.at(r, c);
            if (w == 0.0) continue;
            o.fill(contour, grid.center(r, c));
            const double s = w * kInvTwoPi;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = i + 1 == n ? 0 : i + 1;
                angle_term_grad(o.d[i], o.len[i], o.d[j], o.len[j], k, s, g[i], g[j]);
            }
        }
    }
    return g;
}

NearestNode min_node_distance(Point x, const Contour& contour) {
    NearestNode best{norm(contour[0] - x), 0};
    for (std::size_t i = 1; i < contour.size(); ++i) {
        const double d = norm(contour[i] - x);
        if (d < best.distance) best = {d, i};
    }
    return best;
}

ScalarField contour_to_distance_map(const Contour& contour, const PixelGrid& grid, double k) {
    DistanceForward f = distance_forward(contour, grid, k);
    ScalarField out = std::move(f.product);
    const double inv = 1.0 / f.max_value;
    for (auto& v : out.data) v *= inv;
    out.data[f.argmax] = 1.0;
    return out;
}

ContourGradient contour_to_distance_map_vjp(const Contour& contour, const PixelGrid& grid,
                                            double k, const ScalarField& cotangent) {
    check_cotangent(grid, cotangent);
    const DistanceForward f = distance_forward(contour, grid, k);
    const double m = f.max_value;
    // Cotangent of the unnormalized product g = M * d2.
    ScalarField cot_g(grid.height, grid.width);
    double through_max = 0.0;
    for (std::size_t i = 0; i < cot_g.size(); ++i) {
        cot_g.data[i] = cotangent.data[i] / m;
        through_max += cotangent.data[i] * f.product.data[i];
    }
    cot_g.data[f.argmax] -= through_max / (m * m);

    ScalarField cot_mask(grid.height, grid.width);
    for (std::size_t i = 0; i < cot_g.size(); ++i) cot_mask.data[i] = cot_g.data[i] * f.nearest.data[i];
    ContourGradient g = contour_to_mask_vjp(contour, grid, k, cot_mask);

    std::size_t idx = 0;
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c, ++idx) {
            const double d = f.nearest.data[idx];
            if (d < kPointEps) continue;
            const double s = cot_g.data[idx] * f.mask.data[idx] / d;
            if (s == 0.0) continue;
            const std::size_t j = f.argmin[idx];
            const Point off = contour[j] - grid.center(r, c);
            g[j].x += s * off.x;
            g[j].y += s * off.y;
        }
    }
    return g;
}

double polygon_area(const Contour& contour) { return std::abs(contour.signed_area()); }

ContourGradient polygon_area_gradient(const Contour& contour) {
    const std::size_t n = contour.size();
    ContourGradient g(n);
    const double a = contour.signed_area();
    if (a == 0.0) return g;
    const double sign = a > 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = contour[(i + n - 1) % n];
        const Point& nxt = contour.next(i);
        g[i] = {0.5 * sign * (nxt.y - prev.y), 0.5 * sign * (prev.x - nxt.x)};
    }
    return g;
}

PixelGrid mesh_grid(int image_h, int image_w, int mesh_scale) {
    if (image_h < 1 || image_w < 1) throw Error(ErrorCode::InvalidArgument, "empty image shape");
    if (mesh_scale < 0 || mesh_scale >= kNumScales) {
        throw Error(ErrorCode::InvalidArgument, "mesh_scale must be in [0, 4]");
    }
    const int f = 1 << mesh_scale;
    return {scale_extent(padded_extent(image_h), mesh_scale),
            scale_extent(padded_extent(image_w), mesh_scale), static_cast<double>(f) / image_w,
            static_cast<double>(f) / image_h};
}

ScaleMaps multiscale_maps(const Contour& contour, int image_h, int image_w, double k,
                          int mesh_scale, MapKind kind) {
    const PixelGrid mesh = mesh_grid(image_h, image_w, mesh_scale);
    const ScalarField base = kind == MapKind::Mask ? contour_to_mask(contour, mesh, k)
                                                   : contour_to_distance_map(contour, mesh, k);
    const int hp = padded_extent(image_h);
    const int wp = padded_extent(image_w);
    ScaleMaps maps;
    for (int s = 0; s < kNumScales; ++s) {
        maps[s] = s == mesh_scale ? base
                                  : resize_bilinear(base, scale_extent(hp, s), scale_extent(wp, s));
    }
    return maps;
}

ContourGradient multiscale_maps_vjp(const Contour& contour, int image_h, int image_w, double k,
                                    int mesh_scale, MapKind kind, const ScaleMaps& cotangents) {
    const PixelGrid mesh = mesh_grid(image_h, image_w, mesh_scale);
    ScalarField cot(mesh.height, mesh.width);
    for (int s = 0; s < kNumScales; ++s) {
        if (cotangents[s].size() == 0) continue;
        const ScalarField back = resize_bilinear_adjoint(cotangents[s], mesh.height, mesh.width);
        for (std::size_t i = 0; i < cot.size(); ++i) cot.data[i] += back.data[i];
    }
    return kind == MapKind::Mask ? contour_to_mask_vjp(contour, mesh, k, cot)
                                 : contour_to_distance_map_vjp(contour, mesh, k, cot);
}

}  // namespace dcf
