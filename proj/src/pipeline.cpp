#include "dcf/pipeline.hpp"

#include "dcf/contour_ops.hpp"
#include "dcf/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace dcf {

// ---------------------------------------------------------------------------
// Stain normalization

namespace {

constexpr double kMinIntensity = 1e-6;

Eigen::Matrix<double, 3, 2> he_matrix(const StainReference& ref) {
    Eigen::Matrix<double, 3, 2> m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) m(r, c) = ref.he[r][c];
    return m;
}

Image reconstruct(const Eigen::Matrix<double, 3, 2>& he, const Eigen::Matrix2Xd& conc, int h, int w) {
    Image out(h, w, 3);
    const Eigen::Matrix3Xd od = he * conc;
    for (Eigen::Index p = 0; p < od.cols(); ++p)
        for (int c = 0; c < 3; ++c)
            out.data[static_cast<std::size_t>(p) * 3 + c] = static_cast<float>(std::clamp(std::pow(10.0, -od(c, p)), 0.0, 1.0));
    return out;
}

}  // namespace

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, values.size() - 1);
    return values[i] + (pos - static_cast<double>(i)) * (values[j] - values[i]);
}

Image stain_compose(const std::vector<std::array<double, 2>>& concentrations, int h, int w, const StainReference& ref) {
    if (concentrations.size() != static_cast<std::size_t>(h) * w) {
        throw Error(ErrorCode::ShapeMismatch, "stain_compose: concentration count does not match the extent");
    }
    Eigen::Matrix2Xd conc(2, static_cast<Eigen::Index>(concentrations.size()));
    for (std::size_t p = 0; p < concentrations.size(); ++p) {
        conc(0, static_cast<Eigen::Index>(p)) = concentrations[p][0];
        conc(1, static_cast<Eigen::Index>(p)) = concentrations[p][1];
    }
    return reconstruct(he_matrix(ref), conc, h, w);
}

Image macenko_normalize(const Image& image, const StainReference& ref, const MacenkoParams& params) {
    if (image.channels != 3) throw Error(ErrorCode::InvalidArgument, "macenko: image must have 3 channels");
    const Eigen::Index n = static_cast<Eigen::Index>(image.pixels());
    Eigen::Matrix3Xd od(3, n);
    std::vector<Eigen::Index> tissue;
    for (Eigen::Index p = 0; p < n; ++p) {
        for (int c = 0; c < 3; ++c) {
            od(c, p) = -std::log10(std::max(static_cast<double>(image.data[static_cast<std::size_t>(p) * 3 + c]), kMinIntensity));
        }
        if (od.col(p).norm() > params.od_threshold) tissue.push_back(p);
    }
    if (static_cast<int>(tissue.size()) < params.min_tissue_pixels) {
        throw Error(ErrorCode::InsufficientTissue, "insufficient tissue");
    }
    Eigen::Matrix3Xd t(3, static_cast<Eigen::Index>(tissue.size()));
    for (std::size_t k = 0; k < tissue.size(); ++k) t.col(static_cast<Eigen::Index>(k)) = od.col(tissue[k]);

    const Eigen::Vector3d mean = t.rowwise().mean();
    const Eigen::Matrix3Xd centered = t.colwise() - mean;
    const Eigen::Matrix3d cov = centered * centered.transpose() / std::max<double>(1.0, static_cast<double>(t.cols() - 1));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Eigenvalues ascend; the plane is spanned by the last two vectors.
    Eigen::Matrix<double, 3, 2> plane;
    plane.col(0) = eig.eigenvectors().col(2);
    plane.col(1) = eig.eigenvectors().col(1);
    for (int c = 0; c < 2; ++c)
        if (plane.col(c).sum() < 0) plane.col(c) = -plane.col(c);

    const Eigen::Matrix2Xd proj = plane.transpose() * t;
    std::vector<double> angles(static_cast<std::size_t>(proj.cols()));
    for (Eigen::Index k = 0; k < proj.cols(); ++k) angles[static_cast<std::size_t>(k)] = std::atan2(proj(1, k), proj(0, k));
    const double lo = percentile(angles, params.alpha_percentile);
    const double hi = percentile(angles, 100.0 - params.alpha_percentile);
    Eigen::Vector3d v_lo = plane * Eigen::Vector2d(std::cos(lo), std::sin(lo));
    Eigen::Vector3d v_hi = plane * Eigen::Vector2d(std::cos(hi), std::sin(hi));
    // Hematoxylin absorbs more red than eosin.
    Eigen::Matrix<double, 3, 2> he;
    if (v_lo(0) > v_hi(0)) {
        he.col(0) = v_lo;
        he.col(1) = v_hi;
    } else {
        he.col(0) = v_hi;
        he.col(1) = v_lo;
    }

    const Eigen::Matrix2Xd conc = he.colPivHouseholderQr().solve(od);
    std::array<double, 2> max_c{};
    for (int s = 0; s < 2; ++s) {
        std::vector<double> v(tissue.size());
        for (std::size_t k = 0; k < tissue.size(); ++k) v[k] = conc(s, tissue[k]);
        max_c[s] = percentile(v, 99.0);
        if (!(max_c[s] > 0.0)) throw Error(ErrorCode::InsufficientTissue, "insufficient tissue (degenerate stain estimate)");
    }
    Eigen::Matrix2Xd scaled = conc;
    for (int s = 0; s < 2; ++s) scaled.row(s) *= ref.max_concentration[s] / max_c[s];
    return reconstruct(he_matrix(ref), scaled, image.height, image.width);
}

// ---------------------------------------------------------------------------
// Tissue and candidates

ScalarField grayscale(const Image& image) {
    ScalarField g(image.height, image.width);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const float* px = image.data.data() + p * image.channels;
        g.data[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    return g;
}

namespace {

/// 3x3 box dilation (take_max) or erosion; neighbors outside the image are ignored.
BinaryMask morph3(const BinaryMask& m, bool take_max) {
    BinaryMask out(m.height, m.width);
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j) {
            std::uint8_t v = take_max ? 0 : 1;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const int r = i + di, c = j + dj;
                    if (r < 0 || c < 0 || r >= m.height || c >= m.width) continue;
                    v = take_max ? std::max(v, m.at(r, c)) : std::min(v, m.at(r, c));
                }
            out.at(i, j) = v;
        }
    return out;
}

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

/// 4-connected labels (1-based, raster discovery order); 0 = background.
std::vector<int> label_components(const BinaryMask& m, std::vector<int>& sizes) {
    std::vector<int> labels(m.data.size(), 0);
    sizes.assign(1, 0);
    std::deque<int> queue;
    for (int start = 0; start < static_cast<int>(m.data.size()); ++start) {
        if (!m.data[start] || labels[start]) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        labels[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const int p = queue.front();
            queue.pop_front();
            ++sizes[id];
            const int r = p / m.width, c = p % m.width;
            for (int d = 0; d < 4; ++d) {
                const int rr = r + kDr[d], cc = c + kDc[d];
                if (rr < 0 || cc < 0 || rr >= m.height || cc >= m.width) continue;
                const int q = rr * m.width + cc;
                if (m.data[q] && !labels[q]) {
                    labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
    }
    return labels;
}

}  // namespace

BinaryMask tissue_mask(const Image& image) {
    BinaryMask m(image.height, image.width);
    const ScalarField gray = grayscale(image);
    for (std::size_t p = 0; p < m.data.size(); ++p) {
        const float* px = image.data.data() + p * 3;
        const float mx = std::max({px[0], px[1], px[2]});
        const float mn = std::min({px[0], px[1], px[2]});
        const double sat = mx > 0 ? (mx - mn) / mx : 0.0;
        m.data[p] = sat > 0.05 || gray.data[p] < 0.85;
    }
    return morph3(morph3(m, true), false);
}

BinaryMask fill_holes(const BinaryMask& mask) {
    BinaryMask outside(mask.height, mask.width);
    std::deque<int> queue;
    auto seed = [&](int r, int c) {
        const int p = r * mask.width + c;
        if (!mask.data[p] && !outside.data[p]) {
            outside.data[p] = 1;
            queue.push_back(p);
        }
    };
    for (int r = 0; r < mask.height; ++r) {
        seed(r, 0);
        seed(r, mask.width - 1);
    }
    for (int c = 0; c < mask.width; ++c) {
        seed(0, c);
        seed(mask.height - 1, c);
    }
    while (!queue.empty()) {
        const int p = queue.front();
        queue.pop_front();
        const int r = p / mask.width, c = p % mask.width;
        for (int d = 0; d < 4; ++d) {
            const int rr = r + kDr[d], cc = c + kDc[d];
            if (rr >= 0 && cc >= 0 && rr < mask.height && cc < mask.width) seed(rr, cc);
        }
    }
    BinaryMask filled(mask.height, mask.width);
    for (std::size_t p = 0; p < filled.data.size(); ++p) filled.data[p] = !outside.data[p];
    return filled;
}

std::vector<std::array<int, 2>> trace_boundary(const BinaryMask& m, int start_row, int start_col) {
    auto fg = [&](int r, int c) { return r >= 0 && c >= 0 && r < m.height && c < m.width && m.at(r, c); };
    if (!fg(start_row, start_col)) throw Error(ErrorCode::InvalidArgument, "trace_boundary: start pixel is background");
    // Headings: 0 north, 1 east, 2 south, 3 west. Left turn = +3, right turn = +1 (mod 4).
    std::vector<std::array<int, 2>> out;
    int r = start_row, c = start_col, d = 0;
    const std::size_t limit = 16 * m.data.size() + 16;
    for (std::size_t it = 0; it < limit; ++it) {
        if (fg(r, c)) {
            if (out.empty() || out.back() != std::array<int, 2>{r, c}) out.push_back({r, c});
            d = (d + 3) % 4;
        } else {
            d = (d + 1) % 4;
        }
        r += kDr[d];
        c += kDc[d];
        if (r == start_row && c == start_col && d == 0) break;
    }
    while (out.size() > 1 && out.back() == out.front()) out.pop_back();
    return out;
}

Image crop(const Image& image, int row0, int col0, int row1, int col1) {
    if (row0 < 0 || col0 < 0 || row1 > image.height || col1 > image.width || row0 >= row1 || col0 >= col1) {
        throw Error(ErrorCode::InvalidArgument, "crop: box outside the image");
    }
    Image out(row1 - row0, col1 - col0, image.channels);
    for (int r = row0; r < row1; ++r)
        std::copy(image.pixel(r, col0), image.pixel(r, col0) + static_cast<std::size_t>(out.width) * image.channels,
                  &out.at(r - row0, 0, 0));
    return out;
}

std::vector<Candidate> extract_candidates(const Image& overview, const CandidateConfig& cfg) {
    const BinaryMask tissue = tissue_mask(overview);
    if (tissue.count() == 0) return {};
    const ScalarField gray = grayscale(overview);
    std::vector<double> tissue_gray;
    for (std::size_t p = 0; p < gray.size(); ++p)
        if (tissue.data[p]) tissue_gray.push_back(gray.data[p]);
    const double thr = percentile(tissue_gray, cfg.percentile);

    const BinaryMask region = fill_holes(tissue);
    BinaryMask bright(overview.height, overview.width);
    for (std::size_t p = 0; p < bright.data.size(); ++p) bright.data[p] = region.data[p] && gray.data[p] > thr;

    std::vector<int> sizes;
    const std::vector<int> labels = label_components(bright, sizes);
    struct Box {
        int r0, c0, r1, c1, sr, sc;
    };
    std::vector<Box> boxes(sizes.size(), Box{overview.height, overview.width, -1, -1, -1, -1});
    for (int p = 0; p < static_cast<int>(labels.size()); ++p) {
        const int id = labels[p];
        if (!id) continue;
        const int r = p / overview.width, c = p % overview.width;
        Box& b = boxes[id];
        if (b.sr < 0) {
            b.sr = r;
            b.sc = c;
        }
        b.r0 = std::min(b.r0, r);
        b.c0 = std::min(b.c0, c);
        b.r1 = std::max(b.r1, r + 1);
        b.c1 = std::max(b.c1, c + 1);
    }

    std::vector<Candidate> out;
    for (int id = 1; id < static_cast<int>(sizes.size()); ++id) {
        if (sizes[id] < cfg.min_cc_px) continue;
        const Box& b = boxes[id];
        BinaryMask cc(overview.height, overview.width);
        for (std::size_t p = 0; p < labels.size(); ++p) cc.data[p] = labels[p] == id;
        const auto boundary = trace_boundary(cc, b.sr, b.sc);
        if (boundary.size() < 3) continue;

        Candidate cand;
        cand.cc_id = id;
        cand.margin = cfg.margin_frac;
        const int mr = static_cast<int>(std::lround(cfg.margin_frac * (b.r1 - b.r0)));
        const int mc = static_cast<int>(std::lround(cfg.margin_frac * (b.c1 - b.c0)));
        cand.row0 = std::max(0, b.r0 - mr);
        cand.col0 = std::max(0, b.c0 - mc);
        cand.row1 = std::min(overview.height, b.r1 + mr);
        cand.col1 = std::min(overview.width, b.c1 + mc);
        std::vector<Point> pts;
        for (const auto& [r, c] : boundary) {
            pts.push_back({(c + 0.5 - cand.col0) / (cand.col1 - cand.col0), (r + 0.5 - cand.row0) / (cand.row1 - cand.row0)});
        }
        try {
            cand.contour = resample_equidistant(Contour(pts), cfg.n_nodes);
        } catch (const Error&) {
            continue;
        }
        out.push_back(std::move(cand));
    }
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return a.row0 != b.row0 ? a.row0 < b.row0 : a.col0 < b.col0;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Thresholds and metrics

double f1_at(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        tp += pred && labels[i];
        fp += pred && !labels[i];
        fn += !pred && labels[i];
    }
    return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

ThresholdChoice choose_threshold(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
    if (std::find(labels.begin(), labels.end(), true) == labels.end()) {
        throw Error(ErrorCode::InvalidArgument, "choose_threshold needs at least one positive label");
    }
    std::vector<double> u = scores;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<double> candidates{u.front() - 1.0};
    for (std::size_t i = 0; i + 1 < u.size(); ++i) candidates.push_back(0.5 * (u[i] + u[i + 1]));
    ThresholdChoice best{candidates.front(), -1.0};
    for (double t : candidates) {
        const double f = f1_at(scores, labels, t);
        if (f > best.f1) best = {t, f};
    }
    return best;
}

namespace {

void check_shape(const BinaryMask& a, const BinaryMask& b) {
    if (a.height != b.height || a.width != b.width) throw Error(ErrorCode::ShapeMismatch, "masks differ in extent");
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
    check_shape(a, b);
    std::size_t inter = 0, total = 0;
    for (std::size_t p = 0; p < a.data.size(); ++p) {
        const bool x = a.data[p] != 0, y = b.data[p] != 0;
        inter += x && y;
        total += static_cast<std::size_t>(x) + static_cast<std::size_t>(y);
    }
    return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    check_shape(a, b);
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < a.data.size(); ++p) {
        const bool x = a.data[p] != 0, y = b.data[p] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PanopticResult panoptic_quality(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt) {
    PanopticResult r;
    if (pred.empty() && gt.empty()) {
        r.pq = r.precision = r.recall = r.f1 = r.dice_mean = 1.0;
        return r;
    }
    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < gt.size(); ++j) {
            const double v = iou(pred[i], gt[j]);
            if (v > 0.5) {
                if (pred_used[i] || gt_used[j]) throw Error(ErrorCode::InvalidArgument, "instances overlap: IoU > 0.5 match is not unique");
                pred_used[i] = gt_used[j] = true;
                r.matches.push_back({static_cast<int>(i), static_cast<int>(j), v, dice(pred[i], gt[j])});
            }
        }
    }
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (!pred_used[i]) r.false_positives.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < gt.size(); ++j)
        if (!gt_used[j]) r.false_negatives.push_back(static_cast<int>(j));
    const double tp = static_cast<double>(r.matches.size());
    const double fp = static_cast<double>(r.false_positives.size());
    const double fn = static_cast<double>(r.false_negatives.size());
    double iou_sum = 0.0, dice_sum = 0.0;
    for (const auto& m : r.matches) {
        iou_sum += m.iou;
        dice_sum += m.dice;
    }
    r.pq = iou_sum / (tp + fp / 2 + fn / 2);
    r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.dice_mean = tp > 0 ? dice_sum / tp : 0.0;
    return r;
}

std::string candidates_to_json(const std::vector<Candidate>& candidates) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : candidates) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& p : c.contour.nodes()) nodes.push_back({p.x, p.y});
        arr.push_back({{"bbox", {c.row0, c.col0, c.row1, c.col1}}, {"margin", c.margin}, {"contour", nodes}, {"cc_id", c.cc_id}});
    }
    return arr.dump(2);
}

std::string metrics_to_json(const PanopticResult& r) {
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : r.matches) matches.push_back({{"pred", m.pred}, {"gt", m.gt}, {"iou", m.iou}, {"dice", m.dice}});
    const nlohmann::json j{{"dice_mean", r.dice_mean},     {"precision", r.precision},
                           {"recall", r.recall},           {"f1", r.f1},
                           {"pq", r.pq},                   {"matches", matches},
                           {"false_positives", r.false_positives}, {"false_negatives", r.false_negatives}};
    return j.dump(2);
}

}  // namespace dcf
