#include "dcf/contour.hpp"

#include "dcf/error.hpp"
#include "dcf/file_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

namespace dcf {

double norm(Point p) { return std::hypot(p.x, p.y); }

Contour::Contour(std::vector<Point> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 3) {
        throw Error(ErrorCode::InvalidArgument, "contour needs at least 3 nodes");
    }
    for (const auto& p : nodes_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::InvalidArgument, "contour has non-finite coordinates");
        }
    }
}

double Contour::signed_area() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += cross(nodes_[i], next(i));
    return 0.5 * acc;
}

double Contour::perimeter() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += norm(next(i) - nodes_[i]);
    return acc;
}

Contour Contour::reversed() const {
    std::vector<Point> r;
    r.reserve(nodes_.size());
    r.push_back(nodes_[0]);
    for (std::size_t i = nodes_.size() - 1; i >= 1; --i) r.push_back(nodes_[i]);
    return Contour(std::move(r));
}

void Contour::clamp_unit() {
    for (auto& p : nodes_) {
        p.x = std::clamp(p.x, 0.0, 1.0);
        p.y = std::clamp(p.y, 0.0, 1.0);
    }
}

double gradient_l2_norm(const ContourGradient& g) {
    double acc = 0.0;
    for (const auto& v : g) acc += v.x * v.x + v.y * v.y;
    return std::sqrt(acc);
}

double gradient_max_node_norm(const ContourGradient& g) {
    double m = 0.0;
    for (const auto& v : g) m = std::max(m, norm(v));
    return m;
}

Contour make_circle(Point center, double radius, std::size_t n_nodes) {
    return make_ellipse(center, radius, radius, n_nodes);
}

Contour make_ellipse(Point center, double rx, double ry, std::size_t n_nodes) {
    std::vector<Point> nodes(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_nodes);
        nodes[i] = {center.x + rx * std::cos(a), center.y + ry * std::sin(a)};
    }
    return Contour(std::move(nodes));
}

std::string contour_to_json(const Contour& c) {
    nlohmann::json j;
    auto& arr = j["nodes"] = nlohmann::json::array();
    for (const auto& p : c.nodes()) arr.push_back({p.x, p.y});
    return j.dump();
}

Contour contour_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("contour json: ") + e.what());
    }
    if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
        throw Error(ErrorCode::InvalidArgument, "contour json: missing \"nodes\" array");
    }
    std::vector<Point> nodes;
    for (const auto& n : j["nodes"]) {
        if (!n.is_array() || n.size() != 2 || !n[0].is_number() || !n[1].is_number()) {
            throw Error(ErrorCode::InvalidArgument, "contour json: node must be [x, y]");
        }
        nodes.push_back({n[0].get<double>(), n[1].get<double>()});
    }
    return Contour(std::move(nodes));
}

Contour load_contour(const std::string& path) { return contour_from_json(read_text_file(path)); }

void save_contour(const Contour& c, const std::string& path) {
    write_file_atomic(path, contour_to_json(c) + "\n");
}

}  // namespace dcf
