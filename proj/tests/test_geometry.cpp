#include "dcf/error.hpp"
#include "dcf/geometry.hpp"
#include "dcf/resample.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace dcf;
using namespace dcf::testing;

namespace {

Contour square(double lo, double hi) { return Contour({{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}}); }

double mean_abs_diff(const ScalarField& a, const ScalarField& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
    return acc / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("oriented_angle signs and degenerate points") {
    const double pi = std::numbers::pi;
    CHECK(oriented_angle({1, 0}, {0, 1}, {0, 0}, 1e5) == doctest::Approx(pi / 2).epsilon(1e-6));
    CHECK(oriented_angle({0, 1}, {1, 0}, {0, 0}, 1e5) == doctest::Approx(-pi / 2).epsilon(1e-6));
    CHECK(oriented_angle({1, 0}, {2, 0}, {0, 0}, 3.0) == 0.0);
    CHECK(oriented_angle({0, 0}, {1, 0}, {0, 0}, 1e5) == 0.0);
    CHECK(std::isfinite(oriented_angle({1, 0}, {1, 1e-14}, {0, 0}, 1e5)));
}

TEST_CASE("contour_to_mask inside/outside and soft regime") {
    const PixelGrid g = PixelGrid::unit(64, 64);
    const ScalarField full = contour_to_mask(square(0.0, 1.0), g, 1e5);
    CHECK(full.at(32, 32) >= 0.99);
    CHECK(full.at(32, 32) <= 1.01);

    const ScalarField inner = contour_to_mask(square(0.25, 0.75), g, 1e5);
    // Square spans pixels 16..47; pixel 12 is 4 pixels outside.
    CHECK(std::abs(inner.at(12, 32)) <= 0.01);
    CHECK(std::abs(inner.at(32, 12)) <= 0.01);
    CHECK(std::abs(inner.at(2, 2)) <= 0.01);

    const Contour circle = make_circle({0.5, 0.5}, 0.3, 100);
    const ScalarField soft = contour_to_mask(circle, PixelGrid::unit(64, 64), 10.0);
    CHECK(soft.at(32, 32) < 0.95);
}

TEST_CASE("contour_to_mask: reversing the node order negates the mask") {
    std::mt19937_64 rng(7);
    const Contour c(random_star_polygon(rng, 30, {0.5, 0.5}, 0.15, 0.4));
    const PixelGrid g = PixelGrid::unit(32, 32);
    const ScalarField a = contour_to_mask(c, g, 1e3);
    const ScalarField b = contour_to_mask(c.reversed(), g, 1e3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == doctest::Approx(-b.data[i]).epsilon(0).scale(1).epsilon(1e-9));
}

TEST_CASE("contour_to_mask: interior indicator property on random star polygons") {
    std::mt19937_64 rng(11);
    const int n = 48;
    const PixelGrid g = PixelGrid::unit(n, n);
    for (int trial = 0; trial < 20; ++trial) {
        const auto poly = random_star_polygon(rng, 40, {0.5, 0.5}, 0.2, 0.45);
        const ScalarField m = contour_to_mask(Contour(poly), g, 1e5);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const Point x = g.center(r, c);
                if (distance_to_polyline(poly, x) <= 2.0 / n) continue;
                const double expected = point_in_polygon(poly, x) ? 1.0 : 0.0;
                REQUIRE(std::abs(m.at(r, c) - expected) < 0.01);
            }
        }
    }
}

TEST_CASE("contour_to_mask: error decreases with k and n_nodes") {
    const int n = 128;
    const PixelGrid g = PixelGrid::unit(n, n);
    const ScalarField disk = rasterize_disk({0.5, 0.5}, 0.3, n, n);
    double prev = 1e9;
    for (double k : {1e1, 1e2, 1e3, 1e4, 1e5}) {
        const double err = mean_abs_diff(contour_to_mask(make_circle({0.5, 0.5}, 0.3, 100), g, k), disk);
        CHECK(err <= prev);
        prev = err;
    }
    CHECK(prev < 0.01);
    prev = 1e9;
    for (std::size_t nodes : {10u, 25u, 50u, 100u}) {
        const double err = mean_abs_diff(contour_to_mask(make_circle({0.5, 0.5}, 0.3, nodes), g, 1e5), disk);
        CHECK(err <= prev);
        prev = err;
    }
}

TEST_CASE("contour_to_mask_vjp") {
    const Contour c = make_circle({0.5, 0.5}, 0.3, 16);
    const PixelGrid g = PixelGrid::unit(32, 32);
    const double k = 1e3;

    SUBCASE("zero cotangent gives zero gradient") {
        const auto grad = contour_to_mask_vjp(c, g, k, ScalarField(32, 32));
        CHECK(gradient_max_node_norm(grad) == 0.0);
    }
    SUBCASE("matches central finite differences") {
        std::mt19937_64 rng(3);
        const ScalarField w = random_field(rng, 32, 32);
        const auto analytic = contour_to_mask_vjp(c, g, k, w);
        const auto fd = finite_difference_gradient(
            c, [&](const Contour& cc) { return field_dot(contour_to_mask(cc, g, k), w); }, 1e-5);
        CHECK(relative_max_error(analytic, fd) < 1e-3);
    }
    SUBCASE("adjoint identity <J dC, w> = <dC, J^T w>") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 5; ++trial) {
            const ScalarField w = random_field(rng, 32, 32);
            ContourGradient dir(c.size());
            for (auto& d : dir) d = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
            const double h = 1e-30;
            const double lhs = ComplexStep::directional(
                ComplexStep::mask(c, dir, h, 32, 32, g.pitch_x, g.pitch_y, k), w, h);
            const double rhs = gradient_dot(dir, contour_to_mask_vjp(c, g, k, w));
            CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(rhs));
        }
    }
    SUBCASE("translating contour and cotangent together leaves the gradient unchanged") {
        // Unit cotangent on a 24x24 window that moves with the contour.
        auto window = [](int dr, int dc) {
            ScalarField w(32, 32);
            for (int r = 2; r < 26; ++r)
                for (int q = 2; q < 26; ++q) w.at(r + dr, q + dc) = 1.0;
            return w;
        };
        const Contour small = make_circle({0.4, 0.45}, 0.15, 16);
        Contour moved = small;
        for (auto& p : moved.nodes()) {
            p.x += 3.0 / 32;
            p.y += 2.0 / 32;
        }
        const auto a = contour_to_mask_vjp(small, g, k, window(0, 0));
        const auto b = contour_to_mask_vjp(moved, g, k, window(2, 3));
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i].x - b[i].x) < 1e-6);
            CHECK(std::abs(a[i].y - b[i].y) < 1e-6);
        }
    }
}

TEST_CASE("min_node_distance") {
    const Contour c({{0.1, 0.1}, {0.9, 0.1}, {0.9, 0.9}, {0.5, 0.95}, {0.1, 0.9}});
    const auto hit = min_node_distance({0.5, 0.95}, c);
    CHECK(hit.distance == 0.0);
    CHECK(hit.index == 3);
    // Equidistant to nodes 1 and 2.
    CHECK(min_node_distance({0.95, 0.5}, c).index == 1);

    std::mt19937_64 rng(9);
    const Contour big(random_points(rng, 50));
    for (int t = 0; t < 200; ++t) {
        const Point x{uniform(rng), uniform(rng)};
        double best = 1e9;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < big.size(); ++i) {
            const double d = std::hypot(big[i].x - x.x, big[i].y - x.y);
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        const auto got = min_node_distance(x, big);
        CHECK(got.index == arg);
        CHECK(got.distance == doctest::Approx(best).epsilon(1e-15));
    }
}

TEST_CASE("contour_to_distance_map") {
    const int n = 128;
    const PixelGrid g = PixelGrid::unit(n, n);
    const Contour circle = make_circle({0.5, 0.5}, 0.3, 100);
    const ScalarField d = contour_to_distance_map(circle, g, 1e5);

    CHECK(d.at(64, 64) >= 0.99);
    CHECK(d.at(64, 64) <= 1.0);
    CHECK(std::abs(d.at(5, 5)) <= 0.02);
    CHECK(std::abs(d.at(64, 2)) <= 0.02);
    CHECK(*std::max_element(d.data.begin(), d.data.end()) == 1.0);
    CHECK(*std::min_element(d.data.begin(), d.data.end()) >= -0.1);

    // Brute-force EDT of the rasterized disk, both max-normalized.
    const ScalarField disk = rasterize_disk({0.5, 0.5}, 0.3, n, n);
    BinaryMask bm(n, n);
    for (std::size_t i = 0; i < disk.size(); ++i) bm.data[i] = disk.data[i] > 0.5;
    const auto edt = brute_force_edt(bm);
    const double emax = *std::max_element(edt.begin(), edt.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < edt.size(); ++i)
        if (bm.data[i]) worst = std::max(worst, std::abs(d.data[i] - edt[i] / emax));
    CHECK(worst < 0.05);

    CHECK_THROWS_AS(contour_to_distance_map(Contour({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}), g, 1e5), Error);
}


TEST_CASE("contour_to_distance_map_vjp") {
    const PixelGrid g = PixelGrid::unit(32, 32);
    const double k = 1e3;
    const Contour c = make_circle({0.47, 0.52}, 0.3, 16);

    SUBCASE("zero cotangent") {
        CHECK(gradient_max_node_norm(contour_to_distance_map_vjp(c, g, k, ScalarField(32, 32))) == 0.0);
    }
    SUBCASE("finite differences with switch detection") {
        std::mt19937_64 rng(13);
        const ScalarField w = random_field(rng, 32, 32);
        const auto analytic = contour_to_distance_map_vjp(c, g, k, w);
        const double h = 1e-5;
        double scale = 0.0;
        for (const auto& v : analytic) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
        int checked = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                Contour plus = c;
                Contour minus = c;
                (axis == 0 ? plus[i].x : plus[i].y) += h;
                (axis == 0 ? minus[i].x : minus[i].y) -= h;
                if (!(routing(plus, g, k) == routing(minus, g, k))) continue;
                const double fd = (field_dot(contour_to_distance_map(plus, g, k), w) -
                                   field_dot(contour_to_distance_map(minus, g, k), w)) / (2 * h);
                const double an = axis == 0 ? analytic[i].x : analytic[i].y;
                CHECK(std::abs(fd - an) <= 5e-3 * scale);
                ++checked;
            }
        }
        CHECK(checked >= 24);
    }
    SUBCASE("adjoint identity away from switches") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 3; ++trial) {
            const ScalarField w = random_field(rng, 32, 32);
            ContourGradient dir(c.size());
            for (auto& d : dir) d = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
            const double h = 1e-30;
            const double lhs = ComplexStep::directional(
                ComplexStep::distance(c, dir, h, 32, 32, g.pitch_x, g.pitch_y, k), w, h);
            const double rhs = gradient_dot(dir, contour_to_distance_map_vjp(c, g, k, w));
            CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(rhs));
        }
    }
    SUBCASE("uniform cotangent on a symmetric contour is antisymmetric under half-turn") {
        // Odd grid, circle centered on the middle pixel: the half-turn maps the grid onto itself.
        const PixelGrid odd = PixelGrid::unit(31, 31);
        const Contour sym = make_circle({0.5, 0.5}, 0.3, 16);
        const auto grad = contour_to_distance_map_vjp(sym, odd, k, ScalarField(31, 31, 1.0));
        const auto route = routing(sym, odd, k);
        const std::size_t routed = route.argmin[route.argmax] % 8;
        double scale = gradient_max_node_norm(grad);
        for (std::size_t i = 0; i < 8; ++i) {
            if (i == routed) continue;
            CHECK(std::abs(grad[i].x + grad[i + 8].x) <= 1e-6 * scale);
            CHECK(std::abs(grad[i].y + grad[i + 8].y) <= 1e-6 * scale);
        }
    }
}

TEST_CASE("polygon_area") {
    CHECK(polygon_area(Contour({{0, 0}, {1, 0}, {1, 1}, {0, 1}})) == 1.0);
    CHECK(polygon_area(Contour({{0, 0}, {0.5, 0.5}, {1, 1}})) == 0.0);
    const double n = 100;
    const double r = 0.3;
    const double ngon = 0.5 * n * r * r * std::sin(2 * std::numbers::pi / n);
    const double area = polygon_area(make_circle({0.5, 0.5}, r, 100));
    CHECK(area == doctest::Approx(ngon).epsilon(1e-12));
    CHECK(std::abs(area - std::numbers::pi * r * r) / (std::numbers::pi * r * r) < 2e-3);

    SUBCASE("gradient matches finite differences for both orientations") {
        std::mt19937_64 rng(21);
        const Contour c(random_star_polygon(rng, 12, {0.5, 0.5}, 0.1, 0.4));
        for (const Contour& cc : {c, c.reversed()}) {
            const auto fd = finite_difference_gradient(cc, [](const Contour& x) { return polygon_area(x); }, 1e-6);
            CHECK(relative_max_error(polygon_area_gradient(cc), fd) < 1e-8);
        }
    }
}

TEST_CASE("multiscale_maps") {
    const Contour circle = make_circle({0.5, 0.5}, 0.3, 100);
    SUBCASE("exact mode equals the direct kernel") {
        const auto maps = multiscale_maps(circle, 64, 64, 1e5, 0, MapKind::Mask);
        const auto direct = contour_to_mask(circle, PixelGrid::unit(64, 64), 1e5);
        CHECK(maps[0].data == direct.data);
        CHECK(maps[4].height == 4);
    }
    SUBCASE("constant interior stays constant at every scale") {
        // Contour enclosing the whole padded frame.
        const Contour all({{-1, -1}, {2, -1}, {2, 2}, {-1, 2}});
        for (int m = 0; m < kNumScales; ++m) {
            const auto maps = multiscale_maps(all, 64, 64, 1e5, m, MapKind::Mask);
            for (const auto& f : maps)
                for (double v : f.data) CHECK(v == doctest::Approx(maps[0].data[0]).epsilon(1e-6));
        }
    }
    SUBCASE("mesh scale 2 approximates the exact maps") {
        for (MapKind kind : {MapKind::Mask, MapKind::Distance}) {
            const auto exact = multiscale_maps(circle, 256, 256, 1e5, 0, kind);
            const auto mesh = multiscale_maps(circle, 256, 256, 1e5, 2, kind);
            for (int s = 0; s < kNumScales; ++s) {
                const int n = 256 >> s;
                const double band = 2.0 * ((1 << 2) + (1 << s)) / 256.0;
                double mean = 0.0;
                double worst_off_band = 0.0;
                for (int r = 0; r < n; ++r) {
                    for (int q = 0; q < n; ++q) {
                        const double d = std::abs(exact[s].at(r, q) - mesh[s].at(r, q));
                        mean += d;
                        const double rad = std::hypot((q + 0.5) / n - 0.5, (r + 0.5) / n - 0.5);
                        if (std::abs(rad - 0.3) > band) worst_off_band = std::max(worst_off_band, d);
                    }
                }
                CHECK(mean / (n * n) < 0.05);
                CHECK(worst_off_band < 0.05);
            }
        }
    }
    SUBCASE("padding to a multiple of 16") {
        const auto maps = multiscale_maps(circle, 40, 50, 1e5, 2, MapKind::Mask);
        CHECK(maps[0].height == 48);
        CHECK(maps[0].width == 64);
        CHECK(maps[4].height == 3);
        CHECK(maps[4].width == 4);
    }
    SUBCASE("vjp composes through the resampling") {
        std::mt19937_64 rng(23);
        // Off-center so the distance map's argmax is not a four-way tie.
        const Contour c = make_circle({0.47, 0.52}, 0.3, 16);
        for (MapKind kind : {MapKind::Mask, MapKind::Distance}) {
            ScaleMaps cot;
            for (int s = 0; s < kNumScales; ++s) cot[s] = random_field(rng, 32 >> s, 32 >> s);
            const auto f = [&](const Contour& cc) {
                const auto maps = multiscale_maps(cc, 32, 32, 1e3, 1, kind);
                double acc = 0.0;
                for (int s = 0; s < kNumScales; ++s) acc += field_dot(maps[s], cot[s]);
                return acc;
            };
            ContourGradient dir(c.size());
            for (auto& d : dir) d = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
            const double lhs = directional_derivative(c, dir, f, 1e-6);
            const double rhs = gradient_dot(dir, multiscale_maps_vjp(c, 32, 32, 1e3, 1, kind, cot));
            CHECK(std::abs(lhs - rhs) <= 1e-3 * std::abs(rhs));
        }
    }
}

TEST_CASE("resize adjoint") {
    std::mt19937_64 rng(29);
    const std::pair<int, int> shapes[][2] = {{{32, 32}, {16, 16}}, {{8, 8}, {32, 32}}, {{12, 20}, {3, 5}}, {{5, 7}, {9, 4}}};
    for (const auto& sp : shapes) {
        const ScalarField x = random_field(rng, sp[0].first, sp[0].second);
        const ScalarField y = random_field(rng, sp[1].first, sp[1].second);
        const double lhs = field_dot(resize_bilinear(x, y.height, y.width), y);
        const double rhs = field_dot(x, resize_bilinear_adjoint(y, x.height, x.width));
        CHECK(std::abs(lhs - rhs) < 1e-9);
    }
    ScalarField checker(2, 2);
    checker.data = {0, 1, 1, 0};
    CHECK(resize_bilinear(checker, 1, 1).data[0] == 0.5);
}
