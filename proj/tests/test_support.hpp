/**
 * @file test_support.hpp
 * @brief Independent oracles and generators shared by the unit and acceptance suites.
 *
 * Nothing here calls into the code paths it is used to check.
 */

#pragma once

#include "dcf/contour.hpp"
#include "dcf/field.hpp"
#include "dcf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace dcf::testing {

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Even-odd ray casting.
inline bool point_in_polygon(const std::vector<Point>& poly, Point p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[i];
        const Point b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

inline double point_segment_distance(Point p, Point a, Point b) {
    const Point ab{b.x - a.x, b.y - a.y};
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * ab.x), p.y - (a.y + t * ab.y));
}

inline double distance_to_polyline(const std::vector<Point>& poly, Point p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i)
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    return best;
}

/// Pixel-center rasterization of a polygon on an H x W unit grid.
inline ScalarField rasterize_polygon(const std::vector<Point>& poly, int h, int w) {
    ScalarField out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at(r, c) = point_in_polygon(poly, {(c + 0.5) / w, (r + 0.5) / h}) ? 1.0 : 0.0;
    return out;
}

inline ScalarField rasterize_disk(Point center, double radius, int h, int w) {
    ScalarField out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at(r, c) =
                std::hypot((c + 0.5) / w - center.x, (r + 0.5) / h - center.y) < radius ? 1.0 : 0.0;
    return out;
}

/// Star-shaped simple polygon around `center`, counter-clockwise.
inline std::vector<Point> random_star_polygon(std::mt19937_64& rng, std::size_t n, Point center,
                                              double r_min, double r_max) {
    std::vector<double> angles(n);
    for (auto& a : angles) a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    std::vector<Point> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = uniform(rng, r_min, r_max);
        pts[i] = {center.x + r * std::cos(angles[i]), center.y + r * std::sin(angles[i])};
    }
    return pts;
}

/// Uniform random points; almost always self-intersecting for n >= 5.
inline std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n) {
    std::vector<Point> pts(n);
    for (auto& p : pts) p = {uniform(rng), uniform(rng)};
    return pts;
}

inline ScalarField random_field(std::mt19937_64& rng, int h, int w, double lo = -1.0,
                                double hi = 1.0) {
    ScalarField f(h, w);
    for (auto& v : f.data) v = uniform(rng, lo, hi);
    return f;
}

inline double field_dot(const ScalarField& a, const ScalarField& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

/// Central finite-difference gradient of a scalar function of the contour.
inline ContourGradient finite_difference_gradient(const Contour& c,
                                                  const std::function<double(const Contour&)>& f,
                                                  double h) {
    ContourGradient g(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int axis = 0; axis < 2; ++axis) {
            Contour plus = c;
            Contour minus = c;
            (axis == 0 ? plus[i].x : plus[i].y) += h;
            (axis == 0 ? minus[i].x : minus[i].y) -= h;
            const double d = (f(plus) - f(minus)) / (2.0 * h);
            (axis == 0 ? g[i].x : g[i].y) = d;
        }
    }
    return g;
}

/// Five-point directional derivative of f along `dir`.
inline double directional_derivative(const Contour& c, const ContourGradient& dir,
                                     const std::function<double(const Contour&)>& f, double h) {
    auto shifted = [&](double t) {
        Contour s = c;
        for (std::size_t i = 0; i < c.size(); ++i) {
            s[i].x += t * dir[i].x;
            s[i].y += t * dir[i].y;
        }
        return f(s);
    };
    return (-shifted(2 * h) + 8 * shifted(h) - 8 * shifted(-h) + shifted(-2 * h)) / (12 * h);
}

inline double gradient_dot(const ContourGradient& a, const ContourGradient& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i].x * b[i].x + a[i].y * b[i].y;
    return acc;
}

/// max_i |a_i - b_i| / max_i |b_i| over all coordinates.
inline double relative_max_error(const ContourGradient& a, const ContourGradient& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max({num, std::abs(a[i].x - b[i].x), std::abs(a[i].y - b[i].y)});
        den = std::max({den, std::abs(b[i].x), std::abs(b[i].y)});
    }
    return den > 0 ? num / den : num;
}

/// Argmax pixel and per-pixel argmin node recomputed from the public forward kernels.
struct Routing {
    std::size_t argmax;
    std::vector<std::size_t> argmin;
    bool operator==(const Routing&) const = default;
};

inline Routing routing(const Contour& c, const PixelGrid& g, double k) {
    const ScalarField m = contour_to_mask(c, g, k);
    Routing r{0, {}};
    double best = -1.0;
    std::size_t idx = 0;
    for (int i = 0; i < g.height; ++i) {
        for (int j = 0; j < g.width; ++j, ++idx) {
            const auto nn = min_node_distance(g.center(i, j), c);
            r.argmin.push_back(nn.index);
            if (m.data[idx] * nn.distance > best) {
                best = m.data[idx] * nn.distance;
                r.argmax = idx;
            }
        }
    }
    return r;
}


/// Brute-force Euclidean distance (pixel units) from each foreground pixel to the
/// nearest background pixel, with everything outside the image counted as background.
inline std::vector<double> brute_force_edt(const BinaryMask& m) {
    std::vector<double> out(static_cast<std::size_t>(m.height) * m.width, 0.0);
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            if (!m.at(r, c)) continue;
            long best = std::numeric_limits<long>::max();
            for (int rr = -1; rr <= m.height; ++rr) {
                for (int cc = -1; cc <= m.width; ++cc) {
                    const bool outside = rr < 0 || cc < 0 || rr >= m.height || cc >= m.width;
                    if (!outside && m.at(rr, cc)) continue;
                    const long d = static_cast<long>(rr - r) * (rr - r) + static_cast<long>(cc - c) * (cc - c);
                    best = std::min(best, d);
                }
            }
            out[static_cast<std::size_t>(r) * m.width + c] = std::sqrt(static_cast<double>(best));
        }
    }
    return out;
}

}  // namespace dcf::testing

#include <complex>

namespace dcf::testing {

/// Complex-step forward model of the soft mask / soft distance map. Nodes are
/// perturbed by i*h*dir; Im(result)/h is the exact directional derivative.
struct ComplexStep {
    using cd = std::complex<double>;

    static std::vector<cd> mask(const Contour& c, const ContourGradient& dir, double h, int rows,
                                int cols, double pitch_x, double pitch_y, double k) {
        const std::size_t n = c.size();
        std::vector<cd> out(static_cast<std::size_t>(rows) * cols);
        std::vector<cd> px(n), py(n), len(n);
        for (int r = 0; r < rows; ++r) {
            for (int q = 0; q < cols; ++q) {
                const double x = (q + 0.5) * pitch_x;
                const double y = (r + 0.5) * pitch_y;
                for (std::size_t i = 0; i < n; ++i) {
                    px[i] = cd(c[i].x - x, h * dir[i].x);
                    py[i] = cd(c[i].y - y, h * dir[i].y);
                    len[i] = std::sqrt(px[i] * px[i] + py[i] * py[i]);
                }
                cd acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j = (i + 1) % n;
                    if (len[i].real() < 1e-12 || len[j].real() < 1e-12) continue;
                    cd cosv = (px[i] * px[j] + py[i] * py[j]) / (len[i] * len[j]);
                    if (cosv.real() > 1.0 - 1e-7) cosv = 1.0 - 1e-7;
                    if (cosv.real() < -1.0 + 1e-7) cosv = -1.0 + 1e-7;
                    acc += std::tanh(k * (px[i] * py[j] - py[i] * px[j])) * std::acos(cosv);
                }
                out[static_cast<std::size_t>(r) * cols + q] = acc / (2.0 * std::numbers::pi);
            }
        }
        return out;
    }

    static std::vector<cd> distance(const Contour& c, const ContourGradient& dir, double h,
                                    int rows, int cols, double pitch_x, double pitch_y, double k) {
        std::vector<cd> m = mask(c, dir, h, rows, cols, pitch_x, pitch_y, k);
        std::size_t best_px = 0;
        for (int r = 0; r < rows; ++r) {
            for (int q = 0; q < cols; ++q) {
                const double x = (q + 0.5) * pitch_x;
                const double y = (r + 0.5) * pitch_y;
                cd best = 1e300;
                for (std::size_t i = 0; i < c.size(); ++i) {
                    const cd dx(c[i].x - x, h * dir[i].x);
                    const cd dy(c[i].y - y, h * dir[i].y);
                    const cd d = std::sqrt(dx * dx + dy * dy);
                    if (d.real() < best.real()) best = d;
                }
                auto& v = m[static_cast<std::size_t>(r) * cols + q];
                v *= best;
                if (v.real() > m[best_px].real()) best_px = static_cast<std::size_t>(r) * cols + q;
            }
        }
        const cd mx = m[best_px];
        for (auto& v : m) v /= mx;
        return m;
    }

    static double directional(const std::vector<cd>& field, const ScalarField& w, double h) {
        double acc = 0.0;
        for (std::size_t i = 0; i < field.size(); ++i) acc += field[i].imag() * w.data[i];
        return acc / h;
    }
};

}  // namespace dcf::testing
