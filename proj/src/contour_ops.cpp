#include "dcf/contour_ops.hpp"

#include "dcf/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <unordered_set>

namespace dcf {

namespace {

constexpr double kSweepEps = 1e-12;
constexpr double kCollapseArea = 1e-8;

double orient(Point a, Point b, Point c) { return cross(b - a, c - a); }

bool lex_less(Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

bool adjacent_edges(std::size_t i, std::size_t j, std::size_t n) {
    const std::size_t d = i > j ? i - j : j - i;
    return d <= 1 || d == n - 1;
}

/// Edge as seen by the sweep: endpoints ordered left-to-right (bottom-to-top if vertical).
struct SweepSegment {
    Point left;
    Point right;
    double slope = 0.0;  // +inf for vertical
    bool degenerate = false;

    double y_at(double x, double y_event) const {
        if (std::isinf(slope)) return std::clamp(y_event, left.y, right.y);
        return left.y + (x - left.x) * slope;
    }
};

enum class EventType : int { Remove = 0, Cross = 1, Insert = 2 };

struct SweepEvent {
    Point at;
    EventType type;
    std::size_t a;
    std::size_t b;

    bool operator<(const SweepEvent& o) const {
        if (at.x != o.at.x) return at.x < o.at.x;
        if (at.y != o.at.y) return at.y < o.at.y;
        if (type != o.type) return type < o.type;
        if (a != o.a) return a < o.a;
        return b < o.b;
    }
};

IntersectionEvent make_event(const Contour& c, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    const Point a = c[i];
    const Point b = c.next(i);
    const Point p = c[j];
    const Point q = c.next(j);
    const double den = cross(b - a, q - p);
    const double ti = cross(p - a, q - p) / den;
    const double tj = cross(p - a, b - a) / den;
    return {i, j, a + (b - a) * ti, ti, tj};
}

class Sweep {
public:
    explicit Sweep(const Contour& c) : contour_(c), segs_(c.size()) {
        const std::size_t n = c.size();
        for (std::size_t e = 0; e < n; ++e) {
            Point p = c[e];
            Point q = c.next(e);
            if (lex_less(q, p)) std::swap(p, q);
            SweepSegment& s = segs_[e];
            s.left = p;
            s.right = q;
            s.degenerate = p == q;
            s.slope = p.x == q.x ? std::numeric_limits<double>::infinity() : (q.y - p.y) / (q.x - p.x);
            if (s.degenerate) continue;
            queue_.insert({p, EventType::Insert, e, e});
            queue_.insert({q, EventType::Remove, e, e});
        }
    }

    std::vector<IntersectionEvent> run() {
        while (!queue_.empty()) {
            const SweepEvent ev = *queue_.begin();
            queue_.erase(queue_.begin());
            current_ = ev.at;
            switch (ev.type) {
                case EventType::Insert: insert(ev.a); break;
                case EventType::Remove: remove(ev.a); break;
                case EventType::Cross: cross_over(ev.a, ev.b); break;
            }
        }
        std::sort(found_.begin(), found_.end(), [](const IntersectionEvent& x, const IntersectionEvent& y) {
            if (x.edge_i != y.edge_i) return x.edge_i < y.edge_i;
            return x.t_i < y.t_i;
        });
        return found_;
    }

private:
    /// True when segment t lies above segment s at the current sweep point.
    bool above(std::size_t t, std::size_t s, double ys) const {
        const double yt = segs_[t].y_at(current_.x, current_.y);
        if (yt > ys + kSweepEps) return true;
        if (yt < ys - kSweepEps) return false;
        if (segs_[t].slope != segs_[s].slope) return segs_[t].slope > segs_[s].slope;
        return t > s;
    }

    void insert(std::size_t s) {
        const double ys = segs_[s].y_at(current_.x, current_.y);
        const auto it = std::partition_point(status_.begin(), status_.end(),
                                             [&](std::size_t t) { return !above(t, s, ys); });
        const std::size_t pos = static_cast<std::size_t>(it - status_.begin());
        status_.insert(it, s);
        if (pos > 0) check(status_[pos - 1], s);
        if (pos + 1 < status_.size()) check(s, status_[pos + 1]);
    }

    void remove(std::size_t s) {
        const auto it = std::find(status_.begin(), status_.end(), s);
        if (it == status_.end()) return;
        const std::size_t pos = static_cast<std::size_t>(it - status_.begin());
        status_.erase(it);
        if (pos > 0 && pos < status_.size()) check(status_[pos - 1], status_[pos]);
    }

    void cross_over(std::size_t a, std::size_t b) {
        const auto ia = std::find(status_.begin(), status_.end(), a);
        const auto ib = std::find(status_.begin(), status_.end(), b);
        if (ia == status_.end() || ib == status_.end()) return;
        std::size_t pa = static_cast<std::size_t>(ia - status_.begin());
        std::size_t pb = static_cast<std::size_t>(ib - status_.begin());
        if (pa > pb) std::swap(pa, pb);
        if (pb == pa + 1) {
            std::swap(status_[pa], status_[pb]);
            if (pa > 0) check(status_[pa - 1], status_[pa]);
            if (pb + 1 < status_.size()) check(status_[pb], status_[pb + 1]);
            return;
        }
        // Order drifted through rounding: rebuild it just past the crossing.
        const double x = current_.x + kSweepEps;
        std::stable_sort(status_.begin(), status_.end(), [&](std::size_t s, std::size_t t) {
            const double ys = segs_[s].y_at(x, current_.y);
            const double yt = segs_[t].y_at(x, current_.y);
            if (ys != yt) return ys < yt;
            return s < t;
        });
        for (std::size_t k = 0; k + 1 < status_.size(); ++k) check(status_[k], status_[k + 1]);
    }

    void check(std::size_t s, std::size_t t) {
        const std::size_t n = contour_.size();
        if (adjacent_edges(s, t, n)) return;
        const std::uint64_t key = static_cast<std::uint64_t>(std::min(s, t)) * n + std::max(s, t);
        if (seen_.count(key)) return;
        if (!segments_cross(contour_[s], contour_.next(s), contour_[t], contour_.next(t))) return;
        seen_.insert(key);
        IntersectionEvent ev = make_event(contour_, s, t);
        found_.push_back(ev);
        Point at = ev.point;
        if (lex_less(at, current_)) at = current_;
        queue_.insert({at, EventType::Cross, std::min(s, t), std::max(s, t)});
    }

    const Contour& contour_;
    std::vector<SweepSegment> segs_;
    std::set<SweepEvent> queue_;
    std::vector<std::size_t> status_;  // bottom to top
    std::unordered_set<std::uint64_t> seen_;
    std::vector<IntersectionEvent> found_;
    Point current_;
};

/// One pass of loop splitting; returns the retained loop.
Contour split_and_pick(const Contour& c, const std::vector<IntersectionEvent>& events) {
    const std::size_t n = c.size();
    // Augmented vertex sequence: original nodes with crossings inserted along each edge.
    struct Vertex {
        Point p;
        std::size_t original;  // node index, or npos for a crossing
        std::size_t event;
    };
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<std::pair<double, std::size_t>>> on_edge(n);
    for (std::size_t e = 0; e < events.size(); ++e) {
        on_edge[events[e].edge_i].push_back({events[e].t_i, e});
        on_edge[events[e].edge_j].push_back({events[e].t_j, e});
    }
    std::vector<Vertex> seq;
    std::vector<std::size_t> first_pos(events.size(), npos);
    std::vector<std::size_t> twin;
    for (std::size_t i = 0; i < n; ++i) {
        seq.push_back({c[i], i, npos});
        auto& list = on_edge[i];
        std::sort(list.begin(), list.end());
        for (const auto& [t, e] : list) {
            (void)t;
            seq.push_back({events[e].point, npos, e});
        }
    }
    twin.assign(seq.size(), npos);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const std::size_t e = seq[k].event;
        if (e == npos) continue;
        if (first_pos[e] == npos) {
            first_pos[e] = k;
        } else {
            twin[k] = first_pos[e];
            twin[first_pos[e]] = k;
        }
    }

    // Arriving at a crossing along one strand leaves along the other strand.
    std::vector<char> visited(seq.size(), 0);
    std::vector<Point> best_pts;
    double best_area = -1.0;
    std::size_t best_lowest = npos;
    for (std::size_t start = 0; start < seq.size(); ++start) {
        if (visited[start]) continue;
        std::vector<Point> pts;
        std::size_t lowest = npos;
        std::size_t cur = start;
        do {
            visited[cur] = 1;
            pts.push_back(seq[cur].p);
            lowest = std::min(lowest, seq[cur].original);
            cur = (twin[cur] != npos ? twin[cur] + 1 : cur + 1) % seq.size();
        } while (cur != start && !visited[cur]);
        if (pts.size() < 3) continue;
        double a = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) a += cross(pts[k], pts[(k + 1) % pts.size()]);
        a = std::abs(0.5 * a);
        const double tol = 1e-12 * std::max(a, best_area);
        const bool better = a > best_area + tol ||
                            (std::abs(a - best_area) <= tol && lowest < best_lowest);
        if (better) {
            best_area = a;
            best_lowest = lowest;
            best_pts = std::move(pts);
        }
    }
    if (best_area < kCollapseArea) {
        throw Error(ErrorCode::ContourCollapsed, "contour collapsed");
    }
    // Start at the lowest original node when the loop has one.
    if (best_lowest != npos) {
        const auto it = std::find(best_pts.begin(), best_pts.end(), c[best_lowest]);
        std::rotate(best_pts.begin(), it, best_pts.end());
    }
    Contour out(std::move(best_pts));
    return out.is_ccw() ? out : out.reversed();
}

}  // namespace

bool segments_cross(Point a, Point b, Point c, Point d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    return ((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0));
}

std::vector<IntersectionEvent> find_self_intersections(const Contour& contour) {
    if (contour.size() < 4) return {};
    return Sweep(contour).run();
}

Contour clean(const Contour& contour) {
    auto events = find_self_intersections(contour);
    if (events.empty()) return contour;
    Contour cur = contour;
    // Rounding at crossing points can occasionally leave a new crossing; repeat until none.
    for (int pass = 0; pass < 8 && !events.empty(); ++pass) {
        cur = split_and_pick(cur, events);
        events = find_self_intersections(cur);
    }
    return cur;
}

ContourGradient clip_gradient(const ContourGradient& grad, double max_norm) {
    if (!(max_norm > 0.0)) throw Error(ErrorCode::InvalidArgument, "clip max_norm must be > 0");
    ContourGradient out = grad;
    for (auto& v : out) {
        const double nv = norm(v);
        if (nv > max_norm) v = v * (max_norm / nv);
    }
    return out;
}

ContourGradient blur_gradient(const ContourGradient& grad, double sigma_nodes) {
    if (sigma_nodes < 0.0) throw Error(ErrorCode::InvalidArgument, "blur sigma must be >= 0");
    if (sigma_nodes == 0.0 || grad.empty()) return grad;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_nodes));
    std::vector<double> w(2 * radius + 1);
    double total = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        w[d + radius] = std::exp(-0.5 * d * d / (sigma_nodes * sigma_nodes));
        total += w[d + radius];
    }
    for (auto& v : w) v /= total;
    const long n = static_cast<long>(grad.size());
    ContourGradient out(grad.size());
    for (long i = 0; i < n; ++i) {
        Point acc;
        for (int d = -radius; d <= radius; ++d) {
            const long j = ((i + d) % n + n) % n;
            acc = acc + grad[j] * w[d + radius];
        }
        out[i] = acc;
    }
    return out;
}

Contour resample_equidistant(const Contour& contour, std::size_t n_nodes) {
    if (n_nodes < 3) throw Error(ErrorCode::InvalidArgument, "resample needs n_nodes >= 3");
    const Contour src = contour.signed_area() < 0.0 ? contour.reversed() : contour;
    const std::size_t n = src.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + norm(src.next(i) - src[i]);
    const double perimeter = cum[n];
    if (!(perimeter > 0.0)) throw Error(ErrorCode::DegenerateContour, "zero-perimeter contour");

    std::vector<Point> out(n_nodes);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n_nodes; ++k) {
        const double s = perimeter * static_cast<double>(k) / static_cast<double>(n_nodes);
        while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        out[k] = src[seg] + (src.next(seg) - src[seg]) * t;
    }
    return Contour(std::move(out));
}

}  // namespace dcf
