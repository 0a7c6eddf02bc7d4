/**
 * @file contour.hpp
 * @brief Closed polygon in normalized image coordinates and its gradient type.
 *
 * Coordinates: x is the column fraction, y the row fraction, both in [0,1].
 * Closure is implicit; node n is node 0. Orientation is counter-clockwise in
 * the (x, y) frame, i.e. positive shoelace area.
 */

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dcf {

struct Point {
    double x = 0.0;
    double y = 0.0;

    Point operator+(Point o) const { return {x + o.x, y + o.y}; }
    Point operator-(Point o) const { return {x - o.x, y - o.y}; }
    Point operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Point&) const = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point p);

class Contour {
public:
    Contour() = default;
    /// Throws InvalidArgument on fewer than 3 nodes or non-finite coordinates.
    explicit Contour(std::vector<Point> nodes);

    std::size_t size() const { return nodes_.size(); }
    const Point& operator[](std::size_t i) const { return nodes_[i]; }
    Point& operator[](std::size_t i) { return nodes_[i]; }
    /// Node i+1 with wrap-around.
    const Point& next(std::size_t i) const { return nodes_[(i + 1) % nodes_.size()]; }

    const std::vector<Point>& nodes() const { return nodes_; }
    std::vector<Point>& nodes() { return nodes_; }

    /// Signed shoelace area; positive for counter-clockwise order.
    double signed_area() const;
    double perimeter() const;
    bool is_ccw() const { return signed_area() > 0.0; }
    /// Reverses node order keeping node 0 first.
    Contour reversed() const;
    void clamp_unit();

private:
    std::vector<Point> nodes_;
};

/// Per-node 2-vectors aligned with a Contour's nodes.
using ContourGradient = std::vector<Point>;

double gradient_l2_norm(const ContourGradient& g);
double gradient_max_node_norm(const ContourGradient& g);

/// Regular polygon, counter-clockwise, node 0 at angle 0.
Contour make_circle(Point center, double radius, std::size_t n_nodes);
/// Ellipse with separate radii; same conventions as make_circle.
Contour make_ellipse(Point center, double rx, double ry, std::size_t n_nodes);

/// {"nodes": [[x,y], ...]}
std::string contour_to_json(const Contour& c);
Contour contour_from_json(const std::string& text);
Contour load_contour(const std::string& path);
void save_contour(const Contour& c, const std::string& path);

}  // namespace dcf
