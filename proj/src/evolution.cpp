#include "dcf/evolution.hpp"

#include "dcf/contour_ops.hpp"
#include "dcf/error.hpp"
#include "dcf/file_io.hpp"
#include "dcf/geometry.hpp"
#include "dcf/resample.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

namespace dcf {

using nlohmann::json;

namespace {

constexpr double kNormGuard = 1e-12;

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, "config: " + what);
}

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> vec_sub(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

}  // namespace

Contour dilate_about_centroid(const Contour& c, double factor) {
    Point mean{};
    for (const Point& p : c.nodes()) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(c.size()));
    Contour out = c;
    for (Point& p : out.nodes()) p = mean + (p - mean) * factor;
    out.clamp_unit();
    return out;
}

void EvolutionConfig::validate() const {
    require(n_nodes >= 3, "n_nodes must be >= 3");
    require(std::isfinite(k) && k > 0, "k must be > 0");
    require(std::isfinite(l_r) && l_r > 0, "l_r must be > 0");
    require(e_d > 0 && e_d <= 1, "e_d must be in (0, 1]");
    require(t >= 0, "t must be >= 0");
    require(n_epochs >= 1, "n_epochs must be >= 1");
    require(std::isfinite(lambda_area), "lambda_area must be finite");
    require(clip_max_norm > 0, "clip_max_norm must be > 0");
    require(blur_sigma >= 0, "blur_sigma must be >= 0");
    require(!isoline_centers.empty(), "isoline_centers must not be empty");
    require(isoline_centers.size() == isoline_weights.size(), "isoline_weights must match isoline_centers");
    for (std::size_t i = 0; i < isoline_centers.size(); ++i) {
        require(isoline_centers[i] >= 0 && isoline_centers[i] <= 1, "isoline centers must lie in [0, 1]");
        require(i == 0 || isoline_centers[i] > isoline_centers[i - 1], "isoline centers must be strictly increasing");
    }
    require(n_aug >= 1, "n_aug must be >= 1");
    require(mesh_scale >= 0 && mesh_scale < kPyramidScales, "mesh_scale must be in 0..4");
    require(std::isfinite(init_dilation) && init_dilation > 0, "init_dilation must be > 0");
    require(snapshot_stride >= 0, "snapshot_stride must be >= 0");
}

EvolutionConfig EvolutionConfig::unsupervised_histology() {
    EvolutionConfig c;
    c.k = 1e4;
    c.mesh_scale = 1;
    c.n_epochs = 110;
    c.lambda_area = 5.0;
    return c;
}

EvolutionConfig EvolutionConfig::unsupervised_real_life() {
    EvolutionConfig c;
    c.k = 1e4;
    c.mesh_scale = 1;
    c.n_epochs = 70;
    c.lambda_area = 0.0;
    return c;
}

EvolutionConfig EvolutionConfig::oneshot() {
    EvolutionConfig c;
    c.l_r = 5e-2;
    c.n_epochs = 300;
    c.use_clip = false;
    c.use_blur = true;
    c.mesh_scale = 1;
    c.init_dilation = 1.25;
    return c;
}

namespace {

json to_json_value(const EvolutionConfig& c) {
    return json{{"n_nodes", c.n_nodes},
                {"k", c.k},
                {"l_r", c.l_r},
                {"e_d", c.e_d},
                {"t", c.t},
                {"n_epochs", c.n_epochs},
                {"lambda_area", c.lambda_area},
                {"use_clip", c.use_clip},
                {"clip_max_norm", c.clip_max_norm},
                {"use_blur", c.use_blur},
                {"blur_sigma", c.blur_sigma},
                {"isoline_centers", c.isoline_centers},
                {"isoline_weights", c.isoline_weights},
                {"n_aug", c.n_aug},
                {"mesh_scale", c.mesh_scale},
                {"init_dilation", c.init_dilation},
                {"seed", c.seed},
                {"snapshot_stride", c.snapshot_stride}};
}

template <typename T>
void read_key(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const EvolutionConfig& c) { return to_json_value(c).dump(2); }

EvolutionConfig config_from_json(const std::string& text, const EvolutionConfig& base) {
    EvolutionConfig c = base;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config: expected a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (!to_json_value(base).contains(key)) throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + key + "'");
        }
        read_key(j, "n_nodes", c.n_nodes);
        read_key(j, "k", c.k);
        read_key(j, "l_r", c.l_r);
        read_key(j, "e_d", c.e_d);
        read_key(j, "t", c.t);
        read_key(j, "n_epochs", c.n_epochs);
        read_key(j, "lambda_area", c.lambda_area);
        read_key(j, "use_clip", c.use_clip);
        read_key(j, "clip_max_norm", c.clip_max_norm);
        read_key(j, "use_blur", c.use_blur);
        read_key(j, "blur_sigma", c.blur_sigma);
        read_key(j, "isoline_centers", c.isoline_centers);
        read_key(j, "isoline_weights", c.isoline_weights);
        read_key(j, "init_dilation", c.init_dilation);
        read_key(j, "n_aug", c.n_aug);
        read_key(j, "mesh_scale", c.mesh_scale);
        read_key(j, "seed", c.seed);
        read_key(j, "snapshot_stride", c.snapshot_stride);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_hash(const EvolutionConfig& c) { return fnv1a_hex(to_json_value(c).dump()); }

// ---------------------------------------------------------------------------
// Unsupervised

double loss_unsupervised(const RegionFeatures& rf, const std::array<double, kPyramidScales>& norms,
                         double area, double lambda_area) {
    double loss = 0.0;
    for (int s = 0; s < kPyramidScales; ++s) {
        if (norms[s] <= 0.0) continue;
        loss -= std::ldexp(1.0, -s) * vec_norm(vec_sub(rf.in[s], rf.out[s])) / norms[s];
    }
    return loss - lambda_area * area;
}

Objective unsupervised_objective(const Contour& c, const FeaturePyramid& pyramid, const EvolutionConfig& cfg) {
    const int h = pyramid.image_height;
    const int w = pyramid.image_width;
    const ScaleMaps masks = multiscale_maps(c, h, w, cfg.k, cfg.mesh_scale, MapKind::Mask);
    const RegionFeatures rf = region_features(masks, pyramid);
    const double area = polygon_area(c);

    Objective out;
    out.loss = loss_unsupervised(rf, pyramid.norms, area, cfg.lambda_area);

    ScaleVectors cot_in, cot_out;
    for (int s = 0; s < kPyramidScales; ++s) {
        const auto d = vec_sub(rf.in[s], rf.out[s]);
        const double n = vec_norm(d);
        cot_in[s].assign(d.size(), 0.0);
        cot_out[s].assign(d.size(), 0.0);
        if (n < kNormGuard || pyramid.norms[s] <= 0.0) continue;
        const double scale = -std::ldexp(1.0, -s) / (pyramid.norms[s] * n);
        for (std::size_t ch = 0; ch < d.size(); ++ch) {
            cot_in[s][ch] = scale * d[ch];
            cot_out[s][ch] = -scale * d[ch];
        }
    }
    const ScaleMaps cot = region_features_vjp(masks, pyramid, rf, cot_in, cot_out);
    out.grad = multiscale_maps_vjp(c, h, w, cfg.k, cfg.mesh_scale, MapKind::Mask, cot);
    if (cfg.lambda_area != 0.0) {
        const auto ga = polygon_area_gradient(c);
        for (std::size_t i = 0; i < c.size(); ++i) out.grad[i] = out.grad[i] - ga[i] * cfg.lambda_area;
    }
    return out;
}

ContourGradient normalized_direction(const ContourGradient& grad) {
    const double m = gradient_max_node_norm(grad);
    if (!(m > 0.0)) return ContourGradient(grad.size());
    ContourGradient d = grad;
    for (auto& v : d) v = v * (1.0 / m);
    return d;
}

namespace {

/// One descent step followed by Clean and Interp.
Contour step_contour(const Contour& c, const ContourGradient& grad, double lr, const EvolutionConfig& cfg) {
    ContourGradient dir = cfg.use_blur ? blur_gradient(grad, cfg.blur_sigma) : grad;
    dir = normalized_direction(dir);
    if (cfg.use_clip) dir = clip_gradient(dir, cfg.clip_max_norm);
    Contour next = c;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = next[i] - dir[i] * lr;
    next.clamp_unit();
    return resample_equidistant(clean(next), cfg.n_nodes);
}

using ObjectiveFn = std::function<Objective(const Contour&)>;

std::pair<Contour, EvolutionTrace> run_descent(const Contour& init, const EvolutionConfig& cfg, const ObjectiveFn& objective) {
    Contour c = init;
    EvolutionTrace trace;
    double lr = cfg.l_r;
    double reference_norm = 0.0;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.step_size = lr;
        rec.area = polygon_area(c);
        if (cfg.snapshot_stride > 0 && epoch % cfg.snapshot_stride == 0) rec.snapshot = c;
        Objective obj;
        try {
            obj = objective(c);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyRegion && e.code() != ErrorCode::DegenerateContour) throw;
            trace.degenerate = true;
            trace.failure = e.what();
            break;
        }
        rec.loss = obj.loss;
        rec.grad_norm = gradient_l2_norm(obj.grad);
        trace.epochs.push_back(rec);
        if (epoch == 0) reference_norm = rec.grad_norm;
        if (rec.grad_norm <= cfg.t * reference_norm) {
            trace.converged = true;
            break;
        }
        try {
            c = step_contour(c, obj.grad, lr, cfg);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ContourCollapsed && e.code() != ErrorCode::DegenerateContour) throw;
            trace.degenerate = true;
            trace.failure = e.what();
            break;
        }
        lr *= cfg.e_d;
    }
    return {c, trace};
}

}  // namespace

std::pair<Contour, EvolutionTrace> evolve_unsupervised(const FeaturePyramid& pyramid, const Contour& init,
                                                       const EvolutionConfig& cfg) {
    cfg.validate();
    return run_descent(init, cfg, [&](const Contour& c) { return unsupervised_objective(c, pyramid, cfg); });
}

// ---------------------------------------------------------------------------
// Augmentation

Augmentation draw_augmentation(std::mt19937_64& rng) {
    Augmentation a;
    if (rng() >> 63) a.rot90 = 1 + static_cast<int>(rng() % 3);
    a.hflip = (rng() >> 63) != 0;
    a.vflip = (rng() >> 63) != 0;
    return a;
}

namespace {

/// Generic pixel remap for row-major H x W x C storage.
template <typename T>
std::vector<T> remap(const std::vector<T>& src, int h, int w, int ch, const Augmentation& a, int& out_h, int& out_w) {
    std::vector<T> cur = src;
    int ch_ = h, cw = w;
    for (int q = 0; q < a.rot90; ++q) {
        // counter-clockwise: out(r, c) = in(c, W - 1 - r), out is W x H
        std::vector<T> next(cur.size());
        for (int r = 0; r < cw; ++r)
            for (int c = 0; c < ch_; ++c)
                for (int k = 0; k < ch; ++k)
                    next[(static_cast<std::size_t>(r) * ch_ + c) * ch + k] =
                        cur[(static_cast<std::size_t>(c) * cw + (cw - 1 - r)) * ch + k];
        cur.swap(next);
        std::swap(ch_, cw);
    }
    if (a.hflip) {
        for (int r = 0; r < ch_; ++r)
            for (int c = 0; c < cw / 2; ++c)
                for (int k = 0; k < ch; ++k)
                    std::swap(cur[(static_cast<std::size_t>(r) * cw + c) * ch + k],
                              cur[(static_cast<std::size_t>(r) * cw + (cw - 1 - c)) * ch + k]);
    }
    if (a.vflip) {
        for (int r = 0; r < ch_ / 2; ++r)
            for (int c = 0; c < cw; ++c)
                for (int k = 0; k < ch; ++k)
                    std::swap(cur[(static_cast<std::size_t>(r) * cw + c) * ch + k],
                              cur[(static_cast<std::size_t>(ch_ - 1 - r) * cw + c) * ch + k]);
    }
    out_h = ch_;
    out_w = cw;
    return cur;
}

}  // namespace

Image apply_augmentation(const Image& image, const Augmentation& a) {
    Image out;
    out.channels = image.channels;
    out.data = remap(image.data, image.height, image.width, image.channels, a, out.height, out.width);
    return out;
}

BinaryMask apply_augmentation(const BinaryMask& mask, const Augmentation& a) {
    BinaryMask out;
    out.data = remap(mask.data, mask.height, mask.width, 1, a, out.height, out.width);
    return out;
}

std::pair<Image, BinaryMask> random_augmentation(const Image& image, const BinaryMask& mask, std::mt19937_64& rng) {
    if (image.height != mask.height || image.width != mask.width) {
        throw Error(ErrorCode::ShapeMismatch, "image and mask differ in extent");
    }
    const Augmentation a = draw_augmentation(rng);
    return {apply_augmentation(image, a), apply_augmentation(mask, a)};
}

// ---------------------------------------------------------------------------
// One-shot

ScalarField support_distance_map(const BinaryMask& mask, const FeaturePyramid& pyramid) {
    const ScalarField d = mask_to_distance_map(mask);
    ScalarField out(pyramid[0].height, pyramid[0].width);
    for (int r = 0; r < d.height; ++r)
        for (int c = 0; c < d.width; ++c) out.at(r, c) = d.at(r, c);
    return out;
}

namespace {

ScaleVectors hard_mask_in_means(const BinaryMask& mask, const FeaturePyramid& pyramid) {
    ScalarField m(pyramid[0].height, pyramid[0].width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) m.at(r, c) = mask.at(r, c) ? 1.0 : 0.0;
    ScaleVectors out;
    for (int s = 0; s < kPyramidScales; ++s) {
        out[s] = masked_mean(resize_bilinear(m, pyramid[s].height, pyramid[s].width), pyramid[s]);
    }
    return out;
}

void accumulate(std::vector<double>& acc, const std::vector<double>& v) {
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

}  // namespace

SupportSignature fit_support(const Image& image, const BinaryMask& mask, const Extractor& extractor,
                             const EvolutionConfig& cfg) {
    cfg.validate();
    if (image.height != mask.height || image.width != mask.width) {
        throw Error(ErrorCode::ShapeMismatch, "image and mask differ in extent");
    }
    if (mask.count() == 0) throw Error(ErrorCode::EmptyRegion, "support mask is empty");
    SupportSignature sig;
    sig.centers = cfg.isoline_centers;
    sig.weights = cfg.isoline_weights;
    sig.config_hash = config_hash(cfg);
    sig.isolines.resize(sig.centers.size());

    std::mt19937_64 rng(cfg.seed);
    for (int a = 0; a < cfg.n_aug; ++a) {
        const auto [img, m] = random_augmentation(image, mask, rng);
        const FeaturePyramid p = extractor(img);
        IsolineFeatures iso;
        ScaleVectors in;
        try {
            iso = isoline_features(support_distance_map(m, p), p, sig.centers);
            in = hard_mask_in_means(m, p);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyRegion) throw;
            continue;
        }
        for (std::size_t i = 0; i < iso.size(); ++i)
            for (int s = 0; s < kPyramidScales; ++s) accumulate(sig.isolines[i][s], iso[i][s]);
        for (int s = 0; s < kPyramidScales; ++s) accumulate(sig.in_means[s], in[s]);
        ++sig.used_augmentations;
    }
    if (sig.used_augmentations == 0) throw Error(ErrorCode::EmptyRegion, "every augmentation produced an empty region");
    const double inv = 1.0 / sig.used_augmentations;
    for (auto& per_scale : sig.isolines)
        for (auto& v : per_scale)
            for (auto& x : v) x *= inv;
    for (auto& v : sig.in_means)
        for (auto& x : v) x *= inv;
    return sig;
}

namespace {

void check_query(const SupportSignature& sig, const IsolineFeatures& query) {
    if (query.size() != sig.isolines.size() || sig.weights.size() != sig.isolines.size()) {
        throw Error(ErrorCode::ShapeMismatch, "isoline count mismatch between support and query");
    }
    for (std::size_t i = 0; i < query.size(); ++i)
        for (int s = 0; s < kPyramidScales; ++s)
            if (query[i][s].size() != sig.isolines[i][s].size() || query[i][s].empty()) {
                throw Error(ErrorCode::ShapeMismatch, "feature size mismatch between support and query");
            }
}

}  // namespace

double loss_oneshot(const SupportSignature& sig, const IsolineFeatures& query) {
    check_query(sig, query);
    const double norm = 1.0 / (kPyramidScales * static_cast<double>(query.size()));
    double loss = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        for (int s = 0; s < kPyramidScales; ++s) {
            const double c = static_cast<double>(query[i][s].size());
            loss += sig.weights[i] * std::ldexp(1.0, -s) * vec_norm(vec_sub(sig.isolines[i][s], query[i][s])) / c;
        }
    }
    return loss * norm;
}

Objective oneshot_objective(const Contour& c, const SupportSignature& sig, const FeaturePyramid& pyramid,
                            const EvolutionConfig& cfg) {
    const int h = pyramid.image_height;
    const int w = pyramid.image_width;
    ScaleMaps maps = multiscale_maps(c, h, w, cfg.k, cfg.mesh_scale, MapKind::Distance);
    const ScalarField& d0 = maps[0];
    const IsolineFeatures q = isoline_features(d0, pyramid, sig.centers);

    Objective out;
    out.loss = loss_oneshot(sig, q);

    const double norm = 1.0 / (kPyramidScales * static_cast<double>(q.size()));
    IsolineFeatures cot(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        for (int s = 0; s < kPyramidScales; ++s) {
            const auto d = vec_sub(q[i][s], sig.isolines[i][s]);
            const double n = vec_norm(d);
            cot[i][s].assign(d.size(), 0.0);
            if (n < kNormGuard) continue;
            const double scale = norm * sig.weights[i] * std::ldexp(1.0, -s) / (static_cast<double>(d.size()) * n);
            for (std::size_t ch = 0; ch < d.size(); ++ch) cot[i][s][ch] = scale * d[ch];
        }
    }
    ScaleMaps map_cot;
    map_cot[0] = isoline_features_vjp(d0, pyramid, sig.centers, cot);
    for (int s = 1; s < kNumScales; ++s) map_cot[s] = ScalarField(maps[s].height, maps[s].width);
    out.grad = multiscale_maps_vjp(c, h, w, cfg.k, cfg.mesh_scale, MapKind::Distance, map_cot);
    return out;
}

double similarity_score(const ScaleVectors& support_in, const ScaleVectors& query_in) {
    double score = 0.0;
    for (int s = 0; s < kPyramidScales; ++s) {
        const auto& a = support_in[s];
        const auto& b = query_in[s];
        if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "similarity: feature size mismatch");
        const double na = vec_norm(a);
        const double nb = vec_norm(b);
        if (na < kNormGuard || nb < kNormGuard) continue;
        double dot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
        score += std::ldexp(1.0, -s) * dot / (na * nb);
    }
    return score;
}

double similarity_score(const SupportSignature& sig, const FeaturePyramid& pyramid, const ScalarField& mask) {
    ScaleVectors in;
    for (int s = 0; s < kPyramidScales; ++s) {
        in[s] = masked_mean(resize_bilinear(mask, pyramid[s].height, pyramid[s].width), pyramid[s]);
    }
    return similarity_score(sig.in_means, in);
}

Prediction predict_query(const SupportSignature& sig, const FeaturePyramid& pyramid, const Contour& init,
                         const EvolutionConfig& cfg) {
    cfg.validate();
    if (cfg.isoline_centers != sig.centers) {
        throw Error(ErrorCode::InvalidArgument, "signature isoline centers differ from the config");
    }
    const Contour start = cfg.init_dilation == 1.0 ? init : dilate_about_centroid(init, cfg.init_dilation);
    auto [c, trace] = run_descent(start, cfg, [&](const Contour& cc) { return oneshot_objective(cc, sig, pyramid, cfg); });
    Prediction p{c, 0.0, trace.degenerate, std::move(trace)};
    if (p.rejected) return p;
    try {
        const ScaleMaps m = multiscale_maps(c, pyramid.image_height, pyramid.image_width, cfg.k, cfg.mesh_scale, MapKind::Mask);
        p.score = similarity_score(sig, pyramid, m[0]);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyRegion) throw;
        p.rejected = true;
        p.trace.failure = e.what();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Signature files

void save_signature(const SupportSignature& sig, const std::string& path) {
    WeightStore store;
    auto put = [&](const std::string& name, const std::vector<double>& v) {
        Tensor t{{static_cast<std::uint32_t>(v.size())}, std::vector<float>(v.begin(), v.end())};
        store.insert(name, std::move(t));
    };
    for (std::size_t i = 0; i < sig.isolines.size(); ++i)
        for (int s = 0; s < kPyramidScales; ++s) put("iso." + std::to_string(i) + "." + std::to_string(s), sig.isolines[i][s]);
    for (int s = 0; s < kPyramidScales; ++s) put("inmean." + std::to_string(s), sig.in_means[s]);
    save_weight_container(store, path);
    const json side{{"centers", sig.centers},
                    {"weights", sig.weights},
                    {"config_hash", sig.config_hash},
                    {"used_augmentations", sig.used_augmentations}};
    write_file_atomic(path + ".json", side.dump(2));
}

SupportSignature load_signature(const std::string& path) {
    const WeightStore store = load_weight_container(path);
    SupportSignature sig;
    try {
        const json side = json::parse(read_text_file(path + ".json"));
        sig.centers = side.at("centers").get<std::vector<double>>();
        sig.weights = side.at("weights").get<std::vector<double>>();
        sig.config_hash = side.at("config_hash").get<std::string>();
        sig.used_augmentations = side.value("used_augmentations", 0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("signature sidecar: ") + e.what());
    }
    if (sig.centers.size() != sig.weights.size()) {
        throw Error(ErrorCode::ShapeMismatch, "signature sidecar: centers and weights differ in length");
    }
    auto get = [&](const std::string& name) {
        const Tensor& t = store.get(name);
        return std::vector<double>(t.data.begin(), t.data.end());
    };
    sig.isolines.resize(sig.centers.size());
    for (std::size_t i = 0; i < sig.centers.size(); ++i)
        for (int s = 0; s < kPyramidScales; ++s) sig.isolines[i][s] = get("iso." + std::to_string(i) + "." + std::to_string(s));
    for (int s = 0; s < kPyramidScales; ++s) sig.in_means[s] = get("inmean." + std::to_string(s));
    return sig;
}

}  // namespace dcf
