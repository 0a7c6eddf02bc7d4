// dcf: command-line front end (unsupervised, fit, predict, pipeline, eval, synth, replay).

#include "png_io.hpp"
#include "render.hpp"

#include "dcf/contour_ops.hpp"
#include "dcf/error.hpp"
#include "dcf/evolution.hpp"
#include "dcf/features.hpp"
#include "dcf/file_io.hpp"
#include "dcf/geometry.hpp"
#include "dcf/pipeline.hpp"
#include "dcf/synthetic.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dcf;
using namespace dcf::tools;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyRegion:
        case ErrorCode::ContourCollapsed:
        case ErrorCode::DegenerateContour:
        case ErrorCode::InsufficientTissue:
            return kExitDegenerate;
        default:
            return kExitUsage;
    }
}

/// Exit with a specific code from inside a command.
struct CommandExit {
    int code;
    std::string message;
};

class RunManifest {
public:
    explicit RunManifest(std::vector<std::string> argv) { doc_["argv"] = std::move(argv); }

    void set_command(const std::string& c) { doc_["command"] = c; }
    void set_config(const EvolutionConfig& cfg) {
        doc_["config"] = json::parse(config_to_json(cfg));
        doc_["config_hash"] = config_hash(cfg);
        doc_["seed"] = cfg.seed;
    }
    void input(const std::string& path) {
        if (path.empty()) return;
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) doc_["inputs"][f.string()] = hash_file(f.string());
        } else if (fs::exists(path)) {
            doc_["inputs"][path] = hash_file(path);
        }
    }
    void output(const std::string& path) {
        if (!path.empty()) doc_["outputs"].push_back(path);
    }
    template <typename F>
    auto timed(const std::string& stage, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            json& doc;
            std::string stage;
            std::chrono::steady_clock::time_point t0;
            ~Record() { doc["timings"][stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
        } rec{doc_, stage, t0};
        return f();
    }
    json& doc() { return doc_; }
    void write(const std::string& path, int exit_code) {
        doc_["exit_code"] = exit_code;
        write_file_atomic(path, doc_.dump(2) + "\n");
    }

private:
    json doc_ = json::object();
};

struct CommonOptions {
    std::string config_path;
    std::string extractor = "identity";
    std::string weights_path;
    std::optional<std::uint64_t> seed;
    std::string manifest_path;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_extractor = true) {
    cmd->add_option("--config", o.config_path, "EvolutionConfig JSON (missing keys keep the preset)");
    if (with_extractor) {
        cmd->add_option("--extractor", o.extractor, "Feature extractor")->check(CLI::IsMember({"identity", "conv"}));
        cmd->add_option("--weights", o.weights_path, "DCFW weight container for --extractor conv");
    }
    cmd->add_option("--seed", o.seed, "Overrides the config seed");
    cmd->add_option("--manifest", o.manifest_path, "RunManifest path");
}

EvolutionConfig load_config(const CommonOptions& o, const EvolutionConfig& base) {
    EvolutionConfig cfg = o.config_path.empty() ? base : config_from_json(read_text_file(o.config_path), base);
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();
    return cfg;
}

/// Owns the weights an Extractor points to.
struct ExtractorHolder {
    WeightStore weights;
    Extractor extractor;
};

std::unique_ptr<ExtractorHolder> make_extractor(const CommonOptions& o, RunManifest& m) {
    auto h = std::make_unique<ExtractorHolder>();
    if (o.extractor == "conv") {
        if (o.weights_path.empty()) throw CommandExit{kExitUsage, "--extractor conv requires --weights"};
        if (!fs::exists(o.weights_path)) throw CommandExit{kExitUsage, "weights file not found: " + o.weights_path};
        m.input(o.weights_path);
        h->weights = load_weight_container(o.weights_path);
        validate_vgg16(h->weights);
        h->extractor = Extractor{ExtractorKind::Conv, &h->weights, {}};
    }
    return h;
}

Contour to_image_frame(const Candidate& c, int h, int w) {
    std::vector<Point> pts;
    for (const Point& p : c.contour.nodes())
        pts.push_back({(c.col0 + p.x * (c.col1 - c.col0)) / w, (c.row0 + p.y * (c.row1 - c.row0)) / h});
    return Contour(pts);
}

BinaryMask rasterize(const Contour& c, int h, int w) {
    const ScalarField m = contour_to_mask(c, PixelGrid::unit(h, w), 1e5);
    BinaryMask out(h, w);
    for (std::size_t p = 0; p < out.data.size(); ++p) out.data[p] = m.data[p] > 0.5;
    return out;
}

void write_score(const std::string& path, double score) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g\n", score);
    write_file_atomic(path, buf);
}

std::string trace_to_json(const EvolutionTrace& t) {
    json epochs = json::array();
    for (const auto& e : t.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"grad_norm", e.grad_norm}, {"step_size", e.step_size}, {"area", e.area}});
    return json{{"epochs", epochs}, {"converged", t.converged}, {"degenerate", t.degenerate}, {"failure", t.failure}}.dump(2);
}

int thread_count(int flag) {
    if (const char* env = std::getenv("DCF_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (flag > 0) return flag;
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

struct UnsupervisedArgs {
    CommonOptions common;
    std::string image, init_contour, out_contour, out_overlay, out_frames, out_trace;
    std::string preset = "real-life";
    int frame_stride = 10;
};

int cmd_unsupervised(const UnsupervisedArgs& a, RunManifest& m) {
    m.set_command("unsupervised");
    const EvolutionConfig base = a.preset == "histology" ? EvolutionConfig::unsupervised_histology() : EvolutionConfig::unsupervised_real_life();
    EvolutionConfig cfg = load_config(a.common, base);
    if (!a.out_frames.empty()) cfg.snapshot_stride = a.frame_stride;
    m.set_config(cfg);
    m.input(a.image);
    m.input(a.init_contour);
    const auto ex = make_extractor(a.common, m);
    const Image img = read_png_rgb(a.image);
    Contour init = a.init_contour.empty() ? make_circle({0.5, 0.5}, 0.4, cfg.n_nodes) : load_contour(a.init_contour);
    if (init.size() != cfg.n_nodes) init = resample_equidistant(init, cfg.n_nodes);

    const FeaturePyramid p = m.timed("features", [&] { return ex->extractor(img); });
    auto [c, trace] = m.timed("evolve", [&] { return evolve_unsupervised(p, init, cfg); });

    save_contour(c, a.out_contour);
    m.output(a.out_contour);
    if (!a.out_overlay.empty()) {
        write_png_rgb(a.out_overlay, draw_contour(img, c));
        m.output(a.out_overlay);
    }
    if (!a.out_trace.empty()) {
        write_file_atomic(a.out_trace, trace_to_json(trace));
        m.output(a.out_trace);
    }
    if (!a.out_frames.empty()) {
        fs::create_directories(a.out_frames);
        char name[32];
        for (const auto& e : trace.epochs) {
            if (!e.snapshot) continue;
            std::snprintf(name, sizeof name, "frame_%05d.png", e.epoch);
            write_png_rgb((fs::path(a.out_frames) / name).string(), draw_contour(img, *e.snapshot));
        }
        std::snprintf(name, sizeof name, "frame_%05d.png", static_cast<int>(trace.epochs.size()));
        write_png_rgb((fs::path(a.out_frames) / name).string(), draw_contour(img, c));
        m.output(a.out_frames);
    }
    m.doc()["epochs"] = trace.epochs.size();
    m.doc()["converged"] = trace.converged;
    if (trace.degenerate) throw CommandExit{kExitDegenerate, "degenerate run: " + trace.failure};
    return kExitOk;
}

struct FitArgs {
    CommonOptions common;
    std::string image, mask, out_signature;
};

int cmd_fit(const FitArgs& a, RunManifest& m) {
    m.set_command("fit");
    const EvolutionConfig cfg = load_config(a.common, EvolutionConfig::oneshot());
    m.set_config(cfg);
    m.input(a.image);
    m.input(a.mask);
    const auto ex = make_extractor(a.common, m);
    const Image img = read_png_rgb(a.image);
    const BinaryMask mask = read_png_mask(a.mask);
    const SupportSignature sig = m.timed("fit", [&] { return fit_support(img, mask, ex->extractor, cfg); });
    save_signature(sig, a.out_signature);
    m.output(a.out_signature);
    m.output(a.out_signature + ".json");
    m.doc()["used_augmentations"] = sig.used_augmentations;
    return kExitOk;
}

struct PredictArgs {
    CommonOptions common;
    std::string signature, image, init_contour, out_contour, out_score, out_overlay, out_trace;
    bool auto_init = false;
};

int cmd_predict(const PredictArgs& a, RunManifest& m) {
    m.set_command("predict");
    const EvolutionConfig cfg = load_config(a.common, EvolutionConfig::oneshot());
    m.set_config(cfg);
    m.input(a.signature);
    m.input(a.image);
    m.input(a.init_contour);
    if (a.init_contour.empty() == !a.auto_init) throw CommandExit{kExitUsage, "give exactly one of --init-contour and --auto-init"};
    const auto ex = make_extractor(a.common, m);
    const SupportSignature sig = load_signature(a.signature);
    const Image img = read_png_rgb(a.image);

    Contour init;
    if (a.auto_init) {
        CandidateConfig cc;
        cc.n_nodes = cfg.n_nodes;
        const auto cands = extract_candidates(img, cc);
        if (cands.empty()) throw CommandExit{kExitDegenerate, "--auto-init found no candidate in the patch"};
        auto dist = [&](const Candidate& c) {
            return std::hypot(0.5 * (c.row0 + c.row1) - 0.5 * img.height, 0.5 * (c.col0 + c.col1) - 0.5 * img.width);
        };
        const auto best = std::min_element(cands.begin(), cands.end(), [&](const auto& x, const auto& y) { return dist(x) < dist(y); });
        init = to_image_frame(*best, img.height, img.width);
    } else {
        init = load_contour(a.init_contour);
    }
    if (init.size() != cfg.n_nodes) init = resample_equidistant(init, cfg.n_nodes);

    const FeaturePyramid p = m.timed("features", [&] { return ex->extractor(img); });
    const Prediction pr = m.timed("predict", [&] { return predict_query(sig, p, init, cfg); });
    save_contour(pr.contour, a.out_contour);
    write_score(a.out_score, pr.score);
    m.output(a.out_contour);
    m.output(a.out_score);
    if (!a.out_overlay.empty()) {
        write_png_rgb(a.out_overlay, draw_contour(img, pr.contour));
        m.output(a.out_overlay);
    }
    if (!a.out_trace.empty()) {
        write_file_atomic(a.out_trace, trace_to_json(pr.trace));
        m.output(a.out_trace);
    }
    m.doc()["score"] = pr.score;
    m.doc()["rejected"] = pr.rejected;
    if (pr.rejected) throw CommandExit{kExitDegenerate, "prediction rejected: " + pr.trace.failure};
    return kExitOk;
}

struct PipelineArgs {
    CommonOptions common;
    std::string overview, patches, signature, labels, gt, out;
    bool self_extract = false;
    std::optional<double> score_threshold;
    int threads = 0;
    CandidateConfig candidates;
};

struct CandidateResult {
    double score = 0.0;
    bool rejected = false;
    bool accepted = false;
    std::string failure;
    std::optional<Contour> contour;
};

std::vector<BinaryMask> read_mask_dir(const std::string& dir, std::vector<std::string>* names = nullptr) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<BinaryMask> out;
    for (const auto& f : files) {
        out.push_back(read_png_mask(f.string()));
        if (names) names->push_back(f.stem().string());
    }
    return out;
}

int cmd_pipeline(const PipelineArgs& a, RunManifest& m) {
    m.set_command("pipeline");
    if (a.patches.empty() == !a.self_extract) throw CommandExit{kExitUsage, "give exactly one of --patches and --self-extract"};
    if (!a.score_threshold && a.labels.empty()) throw CommandExit{kExitUsage, "give --score-threshold or --labels"};
    const EvolutionConfig cfg = load_config(a.common, EvolutionConfig::oneshot());
    m.set_config(cfg);
    for (const auto& p : {a.overview, a.patches, a.signature, a.labels, a.gt}) m.input(p);
    const auto ex = make_extractor(a.common, m);
    const SupportSignature sig = load_signature(a.signature);
    const Image overview = read_png_rgb(a.overview);
    fs::create_directories(fs::path(a.out) / "contours");

    CandidateConfig cc = a.candidates;
    cc.n_nodes = cfg.n_nodes;
    m.doc()["candidate_config"] = {{"percentile", cc.percentile}, {"margin_frac", cc.margin_frac}, {"min_cc_px", cc.min_cc_px}};
    const auto cands = m.timed("candidates", [&] { return extract_candidates(overview, cc); });
    const std::string cand_path = (fs::path(a.out) / "candidates.json").string();
    write_file_atomic(cand_path, candidates_to_json(cands) + "\n");
    m.output(cand_path);

    std::vector<CandidateResult> results(cands.size());
    const int n_threads = std::min<int>(thread_count(a.threads), std::max<int>(1, static_cast<int>(cands.size())));
    m.doc()["threads"] = n_threads;
    m.timed("predict", [&] {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < cands.size(); i = next++) {
                const Candidate& c = cands[i];
                CandidateResult& r = results[i];
                try {
                    const Image patch = a.self_extract
                                            ? crop(overview, c.row0, c.col0, c.row1, c.col1)
                                            : read_png_rgb((fs::path(a.patches) / (std::to_string(c.cc_id) + ".png")).string());
                    const Prediction pr = predict_query(sig, ex->extractor(patch), c.contour, cfg);
                    r.score = pr.score;
                    r.rejected = pr.rejected;
                    r.failure = pr.trace.failure;
                    r.contour = pr.contour;
                } catch (const std::exception& e) {
                    r.rejected = true;
                    r.failure = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        return 0;
    });

    double threshold = 0.0;
    json thr_doc;
    if (a.score_threshold) {
        threshold = *a.score_threshold;
        thr_doc = {{"threshold", threshold}, {"source", "flag"}};
    } else {
        const json labels = json::parse(read_text_file(a.labels));
        std::vector<double> scores;
        std::vector<bool> truth;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const std::string key = std::to_string(cands[i].cc_id);
            if (!labels.contains(key) || !results[i].contour) continue;
            const json& v = labels.at(key);
            scores.push_back(results[i].score);
            truth.push_back(v.is_boolean() ? v.get<bool>() : v.get<std::string>() == "pos");
        }
        if (std::find(truth.begin(), truth.end(), true) == truth.end()) {
            throw CommandExit{kExitUsage, "--labels has no positive label among the scored candidates"};
        }
        const ThresholdChoice tc = choose_threshold(scores, truth);
        threshold = tc.threshold;
        thr_doc = {{"threshold", threshold}, {"source", "labels"}, {"f1", tc.f1}};
    }

    json scores = json::array(), accepted = json::array(), rejected = json::array();
    int failures = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        CandidateResult& r = results[i];
        const int id = cands[i].cc_id;
        r.accepted = !r.rejected && r.score > threshold;
        failures += !r.failure.empty();
        scores.push_back({{"cc_id", id}, {"score", r.score}, {"rejected", r.rejected}, {"accepted", r.accepted}, {"failure", r.failure}});
        (r.accepted ? accepted : rejected).push_back(id);
        if (r.contour) {
            const std::string path = (fs::path(a.out) / "contours" / (std::to_string(id) + ".json")).string();
            save_contour(*r.contour, path);
        }
    }
    const auto write_json = [&](const std::string& name, const json& j) {
        const std::string path = (fs::path(a.out) / name).string();
        write_file_atomic(path, j.dump(2) + "\n");
        m.output(path);
    };
    write_json("scores.json", scores);
    write_json("accepted.json", accepted);
    write_json("rejected.json", rejected);
    write_json("threshold.json", thr_doc);
    m.output((fs::path(a.out) / "contours").string());

    if (!a.gt.empty()) {
        std::vector<BinaryMask> preds;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (!results[i].accepted) continue;
            const Candidate& c = cands[i];
            const BinaryMask local = rasterize(*results[i].contour, c.row1 - c.row0, c.col1 - c.col0);
            BinaryMask full(overview.height, overview.width);
            for (int r = 0; r < local.height; ++r)
                for (int q = 0; q < local.width; ++q) full.at(c.row0 + r, c.col0 + q) = local.at(r, q);
            preds.push_back(std::move(full));
        }
        const PanopticResult pq = panoptic_quality(preds, read_mask_dir(a.gt));
        const std::string path = (fs::path(a.out) / "metrics.json").string();
        write_file_atomic(path, metrics_to_json(pq) + "\n");
        m.output(path);
    }
    m.doc()["candidates"] = cands.size();
    m.doc()["failures"] = failures;
    return kExitOk;
}

struct EvalArgs {
    std::string pred, gt, out, manifest_path;
};

int cmd_eval(const EvalArgs& a, RunManifest& m) {
    m.set_command("eval");
    m.input(a.pred);
    m.input(a.gt);
    std::vector<std::string> gt_names;
    const std::vector<BinaryMask> gts = read_mask_dir(a.gt, &gt_names);
    for (std::size_t i = 1; i < gts.size(); ++i)
        if (gts[i].height != gts[0].height || gts[i].width != gts[0].width) throw Error(ErrorCode::ShapeMismatch, "ground-truth masks differ in extent");

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.pred))
        if (e.is_regular_file() && (e.path().extension() == ".png" || e.path().extension() == ".json")) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<BinaryMask> preds;
    std::vector<std::string> pred_names;
    json warnings = json::array();
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        pred_names.push_back(stem);
        if (f.extension() == ".png") {
            preds.push_back(read_png_mask(f.string()));
        } else {
            if (gts.empty()) throw CommandExit{kExitUsage, "contour predictions need ground-truth masks for the frame size"};
            const auto it = std::find(gt_names.begin(), gt_names.end(), stem);
            const BinaryMask& frame = it == gt_names.end() ? gts[0] : gts[static_cast<std::size_t>(it - gt_names.begin())];
            preds.push_back(rasterize(load_contour(f.string()), frame.height, frame.width));
        }
    }
    for (const auto& n : pred_names)
        if (std::find(gt_names.begin(), gt_names.end(), n) == gt_names.end()) warnings.push_back("prediction without ground truth: " + n);
    for (const auto& n : gt_names)
        if (std::find(pred_names.begin(), pred_names.end(), n) == pred_names.end()) warnings.push_back("ground truth without prediction: " + n);
    for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << "\n";

    const PanopticResult r = panoptic_quality(preds, gts);
    const std::string text = metrics_to_json(r) + "\n";
    write_file_atomic(a.out, text);
    m.output(a.out);
    m.doc()["warnings"] = warnings;
    std::cout << text;
    return kExitOk;
}

struct SynthArgs {
    std::string kind, out_image, out_mask, out_init, out_gt, out_labels;
    std::uint64_t seed = 0;
    int size = 64;
    int height = 160, width = 240, n_tubules = 3, n_blobs = 2;
};

int cmd_synth(const SynthArgs& a, RunManifest& m) {
    m.set_command("synth");
    m.doc()["seed"] = a.seed;
    std::mt19937_64 rng(a.seed);
    if (a.kind == "disk") {
        const double c = a.size / 2.0 - 0.5, r = 0.25 * a.size;
        write_png_rgb(a.out_image, disk_image(a.size, a.size, c, c, r, 0.2f, 0.9f));
        if (!a.out_mask.empty()) write_png_mask(a.out_mask, disk_mask(a.size, a.size, c, c, r));
    } else if (a.kind == "tubule" || a.kind == "blob") {
        auto [img, obj] = tubule_patch(rng, a.size, a.kind == "tubule");
        write_png_rgb(a.out_image, img);
        if (!a.out_mask.empty()) write_png_mask(a.out_mask, obj.mask);
        if (!a.out_init.empty()) {
            save_contour(make_circle({(obj.cx + 0.5) / a.size, (obj.cy + 0.5) / a.size}, obj.lumen_radius / a.size, 100), a.out_init);
        }
    } else {
        const SyntheticOverview ov = synthetic_overview(rng, a.height, a.width, a.n_tubules, a.n_blobs);
        write_png_rgb(a.out_image, ov.image);
        if (!a.out_gt.empty()) {
            fs::create_directories(a.out_gt);
            int k = 0;
            for (const auto& o : ov.objects)
                if (o.tubule) write_png_mask((fs::path(a.out_gt) / ("tubule_" + std::to_string(k++) + ".png")).string(), o.mask);
        }
        if (!a.out_labels.empty()) {
            json labels = json::object();
            // Label what the pipeline will see: the 8-bit image, not the float one.
            for (const auto& c : extract_candidates(read_png_rgb(a.out_image))) {
                bool tub = false;
                for (const auto& o : ov.objects)
                    tub |= o.tubule && o.cy >= c.row0 && o.cy < c.row1 && o.cx >= c.col0 && o.cx < c.col1;
                labels[std::to_string(c.cc_id)] = tub;
            }
            write_file_atomic(a.out_labels, labels.dump(2) + "\n");
        }
    }
    for (const auto& p : {a.out_image, a.out_mask, a.out_init, a.out_gt, a.out_labels}) m.output(p);
    return kExitOk;
}

int run(const std::vector<std::string>& args);

/// Runs `body`, maps failures to exit codes and writes the manifest.
template <typename F>
int guarded(RunManifest& m, const std::string& manifest_path, F&& body) {
    int code = kExitOk;
    try {
        code = body();
    } catch (const CommandExit& e) {
        std::cerr << "dcf: " << e.message << "\n";
        m.doc()["error"] = e.message;
        code = e.code;
    } catch (const Error& e) {
        std::cerr << "dcf: " << to_string(e.code()) << ": " << e.what() << "\n";
        m.doc()["error"] = e.what();
        code = exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "dcf: " << e.what() << "\n";
        m.doc()["error"] = e.what();
        code = kExitUsage;
    }
    if (!manifest_path.empty()) {
        try {
            const fs::path parent = fs::path(manifest_path).parent_path();
            if (!parent.empty()) fs::create_directories(parent);
            m.write(manifest_path, code);
        } catch (const std::exception& e) {
            std::cerr << "dcf: cannot write manifest: " << e.what() << "\n";
        }
    }
    return code;
}

std::string default_manifest(const std::string& flag, const std::string& beside) {
    if (!flag.empty()) return flag;
    return beside.empty() ? std::string() : beside + ".manifest.json";
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"dcf: active contours driven by region features, unsupervised or one-shot"};
    app.require_subcommand(1);

    UnsupervisedArgs ua;
    auto* un = app.add_subcommand("unsupervised", "Evolve a contour without supervision");
    un->add_option("--image", ua.image, "Input PNG")->required();
    un->add_option("--init-contour", ua.init_contour, "Initial contour JSON (default: centered circle, radius 0.4)");
    un->add_option("--preset", ua.preset, "Base parameters")->check(CLI::IsMember({"real-life", "histology"}));
    un->add_option("--out-contour", ua.out_contour, "Final contour JSON")->required();
    un->add_option("--out-overlay", ua.out_overlay, "Overlay PNG");
    un->add_option("--out-frames", ua.out_frames, "Directory for frame_%05d.png snapshots");
    un->add_option("--frame-stride", ua.frame_stride, "Epochs between frames")->check(CLI::PositiveNumber);
    un->add_option("--out-trace", ua.out_trace, "Per-epoch loss trace JSON");
    add_common(un, ua.common);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a one-shot support signature");
    fit->add_option("--image", fa.image, "Support PNG")->required();
    fit->add_option("--mask", fa.mask, "Support mask PNG (0/255)")->required();
    fit->add_option("--out-signature", fa.out_signature, "Signature path (DCFW; sidecar at <path>.json)")->required();
    add_common(fit, fa.common);

    PredictArgs pa;
    auto* pred = app.add_subcommand("predict", "Segment and score a query patch");
    pred->add_option("--signature", pa.signature, "Signature from fit")->required();
    pred->add_option("--image", pa.image, "Query PNG")->required();
    pred->add_option("--init-contour", pa.init_contour, "Initial contour JSON");
    pred->add_flag("--auto-init", pa.auto_init, "Initialize from the candidate extractor");
    pred->add_option("--out-contour", pa.out_contour, "Final contour JSON")->required();
    pred->add_option("--out-score", pa.out_score, "Score text file")->required();
    pred->add_option("--out-overlay", pa.out_overlay, "Overlay PNG");
    pred->add_option("--out-trace", pa.out_trace, "Per-epoch loss trace JSON");
    add_common(pred, pa.common);

    PipelineArgs pl;
    auto* pipe = app.add_subcommand("pipeline", "Candidates, one-shot predictions and thresholding over an overview");
    pipe->add_option("--overview", pl.overview, "Overview PNG")->required();
    pipe->add_option("--patches", pl.patches, "Directory of <cc_id>.png patches");
    pipe->add_flag("--self-extract", pl.self_extract, "Crop patches from the overview");
    pipe->add_option("--signature", pl.signature, "Signature from fit")->required();
    pipe->add_option("--score-threshold", pl.score_threshold, "Accept scores above this value");
    pipe->add_option("--labels", pl.labels, "JSON {cc_id: true|false} for the F1-optimal threshold");
    pipe->add_option("--gt", pl.gt, "Directory of ground-truth instance masks (overview frame)");
    pipe->add_option("--out", pl.out, "Output directory")->required();
    pipe->add_option("--percentile", pl.candidates.percentile, "Brightness percentile over tissue")->check(CLI::Range(0.0, 100.0));
    pipe->add_option("--margin-frac", pl.candidates.margin_frac, "Box margin per side, fraction of the box size")->check(CLI::NonNegativeNumber);
    pipe->add_option("--min-cc-px", pl.candidates.min_cc_px, "Smallest candidate component")->check(CLI::PositiveNumber);
    pipe->add_option("--threads", pl.threads, "Worker threads (default: logical cores; DCF_THREADS overrides)");
    add_common(pipe, pl.common);

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Dice / panoptic metrics between prediction and ground-truth directories");
    ev->add_option("--pred", ea.pred, "Contour JSONs or mask PNGs")->required();
    ev->add_option("--gt", ea.gt, "Mask PNGs")->required();
    ev->add_option("--out", ea.out, "Metrics JSON")->required();
    ev->add_option("--manifest", ea.manifest_path, "RunManifest path");

    SynthArgs sa;
    auto* syn = app.add_subcommand("synth", "Write synthetic test images");
    syn->add_option("kind", sa.kind, "disk | tubule | blob | overview")->required()->check(CLI::IsMember({"disk", "tubule", "blob", "overview"}));
    syn->add_option("--out-image", sa.out_image, "Image PNG")->required();
    syn->add_option("--out-mask", sa.out_mask, "Ground-truth mask PNG");
    syn->add_option("--out-init", sa.out_init, "Lumen circle contour JSON (tubule, blob)");
    syn->add_option("--out-gt", sa.out_gt, "Per-tubule mask directory (overview)");
    syn->add_option("--out-labels", sa.out_labels, "Candidate labels JSON (overview)");
    syn->add_option("--seed", sa.seed, "RNG seed");
    syn->add_option("--size", sa.size, "Patch size")->check(CLI::Range(16, 4096));
    syn->add_option("--height", sa.height, "Overview height");
    syn->add_option("--width", sa.width, "Overview width");
    syn->add_option("--tubules", sa.n_tubules, "Overview tubules");
    syn->add_option("--blobs", sa.n_blobs, "Overview bare blobs");

    std::string replay_path;
    auto* rep = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    rep->add_option("manifest", replay_path, "RunManifest JSON")->required()->check(CLI::ExistingFile);

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    RunManifest m(args);
    if (*un) return guarded(m, default_manifest(ua.common.manifest_path, ua.out_contour), [&] { return cmd_unsupervised(ua, m); });
    if (*fit) return guarded(m, default_manifest(fa.common.manifest_path, fa.out_signature), [&] { return cmd_fit(fa, m); });
    if (*pred) return guarded(m, default_manifest(pa.common.manifest_path, pa.out_contour), [&] { return cmd_predict(pa, m); });
    if (*pipe) {
        const std::string mp = pl.common.manifest_path.empty() ? (fs::path(pl.out) / "manifest.json").string() : pl.common.manifest_path;
        return guarded(m, mp, [&] { return cmd_pipeline(pl, m); });
    }
    if (*ev) return guarded(m, default_manifest(ea.manifest_path, ea.out), [&] { return cmd_eval(ea, m); });
    if (*syn) return guarded(m, std::string(), [&] { return cmd_synth(sa, m); });
    try {
        const json doc = json::parse(read_text_file(replay_path));
        const auto recorded = doc.at("argv").get<std::vector<std::string>>();
        if (recorded.size() > 1 && recorded[1] == "replay") {
            std::cerr << "dcf: refusing to replay a replay\n";
            return kExitUsage;
        }
        return run(recorded);
    } catch (const std::exception& e) {
        std::cerr << "dcf: bad manifest: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    return run(std::vector<std::string>(argv, argv + argc));
}
