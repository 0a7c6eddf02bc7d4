#include "render.hpp"

#include <algorithm>
#include <cmath>

namespace dcf::tools {

Image draw_contour(const Image& image, const Contour& contour, std::array<float, 3> color, double width_px) {
    Image out = image;
    const double half = 0.5 * width_px;
    for (std::size_t i = 0; i < contour.size(); ++i) {
        // Pixel coordinates with pixel centers at integer + 0.5.
        const Point a{contour[i].x * image.width, contour[i].y * image.height};
        const Point b{contour.next(i).x * image.width, contour.next(i).y * image.height};
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half)));
        const int c1 = std::min(image.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half)));
        const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half)));
        const int r1 = std::min(image.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half)));
        const Point ab = b - a;
        const double len2 = dot(ab, ab);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                const Point p{c + 0.5, r + 0.5};
                const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
                const Point q = a + ab * t;
                if (std::hypot(p.x - q.x, p.y - q.y) <= half)
                    for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = color[ch];
            }
    }
    return out;
}

}  // namespace dcf::tools
