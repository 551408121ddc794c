#include "lapkm/data.hpp"
#include "lapkm/eval.hpp"
#include "lapkm/image.hpp"
#include "lapkm/model_io.hpp"
#include "lapkm/oos.hpp"
#include "lapkm/parallel.hpp"
#include "lapkm/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;
using namespace lapkm;

// --config reads JSON: top-level keys are global flags, nested objects are subcommand
// flags. A run report is accepted too (its "config" member is used), which is how a
// recorded run is replayed. Flags given on the command line win.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        return record(app, default_also).dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
        if (!doc.is_object()) throw CLI::ConversionError("config must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        collect(doc, {}, items);
        return items;
    }

    static json record(const CLI::App* app, bool default_also) {
        json out = json::object();
        for (const CLI::Option* opt : app->get_options()) {
            const std::string name = opt->get_single_name();
            if (name == "help" || name == "config" || name.empty()) continue;
            if (opt->count() > 0) {
                const auto& res = opt->results();
                out[name] = res.size() == 1 ? json(res.front()) : json(res);
            } else if (default_also && !opt->get_default_str().empty()) {
                out[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands()) out[sub->get_name()] = record(sub, default_also);
        return out;
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void collect(const json& obj, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto inner = parents;
                inner.push_back(key);
                items.push_back({inner, "++", {}});
                collect(value, inner, items);
                items.push_back({inner, "--", {}});
            } else if (!value.is_null()) {
                CLI::ConfigItem item{parents, key, {}};
                if (value.is_array()) {
                    for (const auto& v : value) item.inputs.push_back(scalar(v));
                } else {
                    item.inputs.push_back(scalar(value));
                }
                items.push_back(std::move(item));
            }
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double parse_positive(const std::string& text, const char* what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !(v > 0) || !std::isfinite(v)) throw_usage(std::string(what) + ": expected a positive number, got '" + text + "'");
    return v;
}

std::filesystem::path sibling(const std::filesystem::path& base, const std::string& suffix) {
    auto p = base;
    p.replace_extension();
    return p.string() + suffix;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot write " + path.string());
    out << doc.dump(1) << '\n';
}

// Flags shared by cluster and segment.
struct FitFlags {
    Index k = 0;
    std::string sigma = "auto";
    double lambda = 1;
    int knn = 5;
    std::string weights = "heat";
    std::string heat_width = "auto";
    std::string homotopy;
    int restarts = 20;
    std::uint64_t seed = 0;
    Tolerances<double> tol;

    CLI::Option* lambda_opt = nullptr;
    CLI::Option* sigma_opt = nullptr;
    CLI::Option* homotopy_opt = nullptr;
    CLI::Option* knn_opt = nullptr;

    void add(CLI::App* sub, bool graph_flags) {
        sigma_opt = sub->add_option("--sigma", sigma, "kde bandwidth: a number, 'auto' (mean distance to the 7th nearest neighbour) or 'inf'")
                        ->capture_default_str();
        lambda_opt = sub->add_option("--lambda", lambda, "weight of the Laplacian smoothing term")->capture_default_str();
        if (graph_flags) {
            knn_opt = sub->add_option("--knn", knn, "neighbours per point in the affinity graph")->capture_default_str();
            sub->add_option("--weights", weights, "graph edge weights")->check(CLI::IsMember({"heat", "binary"}))->capture_default_str();
        }
        sub->add_option("--heat-width", heat_width, "heat kernel width: a number or 'auto' (= sigma)")->capture_default_str();
        homotopy_opt = sub->add_option("--homotopy", homotopy,
                                       "sigma continuation start:end:steps (geometric); lambda stays fixed and end is the final sigma");
        sub->add_option("--restarts", restarts, "k-means++ restarts for the initialization")->capture_default_str();
        sub->add_option("--seed", seed, "seed for all randomness")->capture_default_str();
        sub->add_option("--zstep-tol", tol.zstep_tol, "Z-step relative row-change tolerance")->capture_default_str();
        sub->add_option("--max-zstep-iters", tol.max_zstep_iters, "Z-step iteration cap")->capture_default_str();
        sub->add_option("--cstep-tol", tol.cstep_rel_tol, "C-step mean-shift tolerance, relative to sigma")->capture_default_str();
        sub->add_option("--max-cstep-iters", tol.max_cstep_iters, "C-step mean-shift iteration cap")->capture_default_str();
        sub->add_option("--outer-tol", tol.outer_tol, "relative objective change that ends the alternation")->capture_default_str();
        sub->add_option("--max-outer", tol.max_outer, "alternation cap")->capture_default_str();
    }
};

struct Homotopy {
    double start = 0;
    double end = 0;
    int steps = 0;
};

std::optional<Homotopy> parse_homotopy(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw_usage("--homotopy: expected start:end:steps, got '" + text + "'");
    Homotopy h;
    h.start = parse_positive(text.substr(0, a), "--homotopy start");
    h.end = parse_positive(text.substr(a + 1, b - a - 1), "--homotopy end");
    const double steps = parse_positive(text.substr(b + 1), "--homotopy steps");
    if (steps != std::floor(steps)) throw_usage("--homotopy: steps must be an integer");
    h.steps = static_cast<int>(steps);
    if (h.start < h.end) throw_usage("--homotopy: start must be at least end");
    return h;
}

// The trained model plus what the report needs to say about how it was obtained.
struct Trained {
    LapKModesModel<double> model;
    json resolved;
    json timings;
};

// Laplacian K-modes / K-modes / Laplacian K-means share this path; kmodes is lambda = 0.
Trained train_lapkm(const Matrix<double>& points, FitFlags& f, GraphSpec graph, bool force_kmeans_limit) {
    Trained out;
    const auto t_all = std::chrono::steady_clock::now();
    if (f.k < 1) throw_usage("--k must be at least 1");
    if (points.rows() < f.k) throw_usage("fewer points than clusters");
    const auto homotopy = parse_homotopy(f.homotopy);

    double sigma = 0;
    std::string sigma_source = "given";
    if (force_kmeans_limit) {
        if (f.sigma_opt->count() > 0 && f.sigma != "inf") throw_usage("--algo lapkmeans fixes sigma = inf");
        if (homotopy) throw_usage("--homotopy needs a finite sigma");
        sigma = infinite_bandwidth<double>();
    } else if (homotopy) {
        if (f.sigma_opt->count() > 0 && f.sigma != "auto" && parse_positive(f.sigma, "--sigma") != homotopy->end) {
            throw_usage("--sigma must equal the --homotopy end value");
        }
        sigma = homotopy->end;
        sigma_source = "homotopy end";
    } else if (f.sigma == "auto") {
        sigma = bandwidth_knn_heuristic(points, 7);
        sigma_source = "7-NN heuristic";
    } else if (f.sigma == "inf") {
        sigma = infinite_bandwidth<double>();
    } else {
        sigma = parse_positive(f.sigma, "--sigma");
    }

    if (f.heat_width != "auto") graph.heat_width = parse_positive(f.heat_width, "--heat-width");
    double fallback = 0;
    if (graph.weighting == Weighting::heat && !graph.heat_width && is_infinite_bandwidth(sigma)) {
        fallback = bandwidth_knn_heuristic(points, 7);
    }
    graph = resolve_heat_width(graph, sigma, fallback);

    HyperParams<double> hp;
    hp.k = f.k;
    hp.lambda = f.lambda;
    hp.sigma = sigma;
    hp.graph = graph;

    auto t0 = std::chrono::steady_clock::now();
    const auto g = build_knn_graph(points, graph);
    out.timings["graph_s"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto init = kmeans_initial_state(points, f.k, f.restarts, f.seed);
    out.timings["init_s"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    if (homotopy) {
        HomotopySchedule<double> sched;
        sched.sigma_start = homotopy->start;
        sched.sigma_end = homotopy->end;
        sched.steps = homotopy->steps;
        sched.lambda_start = sched.lambda_end = f.lambda;
        out.model = fit_homotopy(points, g, hp, sched, f.tol, init.z, init.centroids);
    } else {
        out.model = fit(points, g, hp, f.tol, init.z, init.centroids);
    }
    out.timings["fit_s"] = seconds_since(t0);
    out.timings["total_s"] = seconds_since(t_all);

    out.resolved["sigma"] = is_infinite_bandwidth(sigma) ? json("inf") : json(sigma);
    out.resolved["sigma_source"] = sigma_source;
    out.resolved["graph"] = graph_spec_to_json(graph);
    out.resolved["graph_edges"] = g.edges().size();
    out.resolved["largest_laplacian_eigenvalue"] = g.largest_eigenvalue();
    return out;
}

json model_summary(const LapKModesModel<double>& m) {
    json s;
    s["objective"] = m.objective;
    s["objective_history"] = m.history;
    s["alternations"] = m.alternations;
    s["converged"] = m.converged;
    json frozen = json::array();
    for (std::size_t k = 0; k < m.frozen.size(); ++k) {
        if (m.frozen[k]) frozen.push_back(k);
    }
    s["frozen_clusters"] = frozen;
    json stages = json::array();
    for (const auto& st : m.stages) {
        stages.push_back({{"sigma", st.sigma}, {"lambda", st.lambda}, {"objective", st.objective}, {"alternations", st.alternations}});
    }
    s["stages"] = stages;
    return s;
}

void check_finite(const LapKModesModel<double>& m) {
    if (!std::isfinite(m.objective) || !all_finite(m.assignments) || !all_finite(m.centroids.centers)) {
        throw_numerical("training produced non-finite values");
    }
}

LapKModesModel<double> hard_model(const Matrix<double>& points, const Matrix<double>& centers, double sigma, const Labels& labels) {
    LapKModesModel<double> m;
    m.hyper.k = centers.rows();
    m.hyper.lambda = 0;
    m.hyper.sigma = sigma;
    m.training_data = points;
    m.centroids = {centers, sigma};
    m.assignments = one_hot<double>(labels, centers.rows());
    m.frozen.assign(static_cast<std::size_t>(centers.rows()), false);
    m.converged = true;
    m.alternations = 1;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laplacian K-modes clustering: centroids are modes of per-cluster kernel density estimates and "
                 "soft assignments are smoothed over a neighbourhood graph."};
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file mirroring the flags (global keys at top level, subcommand flags in a nested object); "
                                   "a run report is accepted as well. Command-line flags win.");
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    gen->footer(
        "spirals: 5 arms r = 0.5 + 0.35 theta with theta evenly spaced over [0.25 pi, 5.25 pi] (2.5 turns), arm k rotated by "
        "2 pi k / 5, default noise 0.02, labels 0-4.\n"
        "moons: half circles of radius 1 centred at (0, 0) (upper) and (1, 0.5) (lower), default noise 0.1; outliers are "
        "uniform over the inliers' bounding box inflated by 25% and labelled -1.\n"
        "occluder: a dark square on a bright textured ramp, written as PGM with a PGM mask of the square.");
    std::string gen_kind;
    std::filesystem::path gen_out, gen_labels_out, gen_mask_out;
    int per_cluster = 400, outliers = 0;
    double noise = -1;
    std::uint64_t gen_seed = 0;
    Index occ_size = 64, occ_square = 24;
    double occ_texture = 0.1;
    gen->add_option("kind", gen_kind, "spirals, moons or occluder")->required()->check(CLI::IsMember({"spirals", "moons", "occluder"}));
    gen->add_option("-o,--output", gen_out, "data CSV (image PGM for occluder)")->required();
    gen->add_option("--labels-out", gen_labels_out, "labels CSV (default: <output>.labels.csv)");
    gen->add_option("--mask-out", gen_mask_out, "occluder mask PGM (default: <output>.mask.pgm)");
    gen->add_option("--per-cluster", per_cluster, "points per cluster")->capture_default_str();
    gen->add_option("--outliers", outliers, "uniform outliers (moons)")->capture_default_str();
    gen->add_option("--noise", noise, "Gaussian noise sd (negative = per-kind default)")->capture_default_str();
    gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
    gen->add_option("--size", occ_size, "occluder image side in pixels")->capture_default_str();
    gen->add_option("--square", occ_square, "occluder square side in pixels")->capture_default_str();
    gen->add_option("--texture", occ_texture, "occluder background texture sd")->capture_default_str();

    // cluster
    auto* clu = app.add_subcommand("cluster", "train a model and label the training data");
    std::filesystem::path clu_data, clu_model, clu_labels, clu_soft, clu_report;
    std::string algo = "lapkm";
    bool labeled = false;
    std::string gms_range;
    FitFlags cf;
    clu->add_option("data", clu_data, "data CSV")->required();
    clu->add_option("--algo", algo, "lapkm, kmodes (lambda = 0), kmeans, lapkmeans (sigma = inf) or gms (Gaussian mean-shift)")
        ->check(CLI::IsMember({"lapkm", "kmodes", "kmeans", "lapkmeans", "gms"}))
        ->capture_default_str();
    clu->add_option("--k", cf.k, "number of clusters (for gms: find a sigma giving k modes)");
    cf.add(clu, true);
    clu->add_option("--gms-range", gms_range, "lo:hi sigma bracket searched when gms is given --k");
    clu->add_flag("--labeled", labeled, "the last CSV column holds class labels; it is dropped before training");
    clu->add_option("-o,--model", clu_model, "model JSON")->required();
    clu->add_option("--labels-out", clu_labels, "hard labels CSV (default: <model>.labels.csv)");
    clu->add_option("--soft-out", clu_soft, "soft assignments CSV (default: <model>.soft.csv)");
    clu->add_option("--report", clu_report, "run report JSON (default: <model>.report.json)");

    // predict
    auto* pre = app.add_subcommand("predict", "out-of-sample assignments for new points");
    std::filesystem::path pre_model, pre_data, pre_out;
    bool pre_labeled = false;
    pre->add_option("data", pre_data, "points CSV")->required();
    pre->add_option("-m,--model", pre_model, "model JSON")->required();
    pre->add_option("-o,--output", pre_out, "CSV of soft assignments with the hard label as last column")->required();
    pre->add_flag("--labeled", pre_labeled, "the last CSV column holds class labels and is ignored");

    // eval
    auto* ev = app.add_subcommand("eval", "score predicted labels against ground truth");
    std::filesystem::path ev_pred, ev_truth;
    std::string metric = "all", nmi_norm = "sqrt";
    bool inliers_only = false;
    ev->add_option("--pred", ev_pred, "predicted labels CSV")->required();
    ev->add_option("--truth", ev_truth, "true labels CSV")->required();
    ev->add_option("--metric", metric, "acc, nmi or all")->check(CLI::IsMember({"acc", "nmi", "all"}))->capture_default_str();
    ev->add_option("--nmi-norm", nmi_norm, "nmi normalization: sqrt, max or avg")->check(CLI::IsMember({"sqrt", "max", "avg"}))->capture_default_str();
    ev->add_flag("--inliers-only", inliers_only, "ignore points whose true label is negative");

    // segment
    auto* seg = app.add_subcommand("segment", "cluster the pixels of a grayscale image on the 8-neighbour lattice");
    std::filesystem::path seg_image, seg_out, seg_mask, seg_model, seg_report;
    FitFlags sf;
    sf.k = 5;
    sf.lambda = 0.1;
    seg->add_option("image", seg_image, "PGM image")->required();
    seg->add_option("-o,--output", seg_out, "label map PGM")->required();
    seg->add_option("--mask", seg_mask, "PGM mask of the object (nonzero pixels) for scoring");
    seg->add_option("--k", sf.k, "number of clusters")->capture_default_str();
    sf.add(seg, false);
    seg->add_option("--model", seg_model, "also write the model JSON");
    seg->add_option("--report", seg_report, "run report JSON");

    // kde-grid
    auto* kg = app.add_subcommand("kde-grid", "per-cluster kde values and out-of-sample assignments on a 2-D grid");
    std::filesystem::path kg_model, kg_out;
    int resolution = 100;
    std::vector<double> bounds;
    kg->add_option("-m,--model", kg_model, "model JSON over 2-D data")->required();
    kg->add_option("-o,--output", kg_out, "grid CSV: x, y, p_1..p_K, z_1..z_K")->required();
    kg->add_option("--resolution", resolution, "grid nodes per axis")->capture_default_str();
    kg->add_option("--bounds", bounds, "xmin xmax ymin ymax (default: training data bounding box)")->expected(4);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (threads < 0) throw_usage("--threads must be nonnegative");
        set_num_threads(threads);

        if (gen->parsed()) {
            if (gen_kind == "occluder") {
                const auto occ = synthetic_occluder(occ_size, occ_square, occ_texture, gen_seed);
                write_pgm(gen_out, occ.image);
                GrayImage mask = occ.image;
                for (std::size_t i = 0; i < mask.pixels.size(); ++i) mask.pixels[i] = occ.mask[i] ? 255 : 0;
                write_pgm(gen_mask_out.empty() ? sibling(gen_out, ".mask.pgm") : gen_mask_out, mask);
                return 0;
            }
            SyntheticSpec spec;
            spec.kind = gen_kind == "spirals" ? SyntheticKind::spirals : SyntheticKind::moons;
            spec.points_per_cluster = per_cluster;
            spec.outliers = outliers;
            spec.noise_sd = noise;
            spec.seed = gen_seed;
            const auto data = generate_synthetic(spec);
            write_csv(gen_out, data.points);
            write_labels_csv(gen_labels_out.empty() ? sibling(gen_out, ".labels.csv") : gen_labels_out, *data.labels);
            return 0;
        }

        if (clu->parsed()) {
            const auto data = load_csv(clu_data, labeled);
            const Matrix<double>& x = data.points;
            const bool uses_lambda = algo == "lapkm" || algo == "lapkmeans";
            if (!uses_lambda && cf.lambda_opt->count() > 0 && algo != "kmodes") throw_usage("--lambda does not apply to --algo " + algo);
            if (algo == "kmodes" && cf.lambda_opt->count() > 0 && cf.lambda != 0) throw_usage("--algo kmodes fixes lambda = 0");
            if ((algo == "kmeans" || algo == "gms") && cf.homotopy_opt->count() > 0) throw_usage("--homotopy does not apply to --algo " + algo);
            if (algo == "kmeans" && cf.sigma_opt->count() > 0) throw_usage("--sigma does not apply to --algo kmeans");
            if (algo != "gms" && !gms_range.empty()) throw_usage("--gms-range applies to --algo gms only");

            Trained t;
            const auto t0 = std::chrono::steady_clock::now();
            if (algo == "lapkm" || algo == "kmodes" || algo == "lapkmeans") {
                if (algo == "kmodes") cf.lambda = 0;
                GraphSpec gs;
                gs.k = cf.knn;
                gs.weighting = cf.weights == "heat" ? Weighting::heat : Weighting::binary;
                t = train_lapkm(x, cf, gs, algo == "lapkmeans");
            } else if (algo == "kmeans") {
                if (cf.k < 1) throw_usage("--k must be at least 1");
                const auto km = kmeans_best_of(x, cf.k, cf.restarts, cf.seed);
                t.model = hard_model(x, km.centers, infinite_bandwidth<double>(), km.labels);
                t.model.objective = km.objective;
                t.model.history = {km.objective};
                t.resolved["sigma"] = "inf";
            } else {
                double sigma = 0;
                if (cf.k > 0) {
                    if (gms_range.empty()) throw_usage("--algo gms with --k needs --gms-range lo:hi");
                    const auto colon = gms_range.find(':');
                    if (colon == std::string::npos) throw_usage("--gms-range: expected lo:hi");
                    const double lo = parse_positive(gms_range.substr(0, colon), "--gms-range lo");
                    const double hi = parse_positive(gms_range.substr(colon + 1), "--gms-range hi");
                    sigma = gms_find_sigma_for_k(x, cf.k, lo, hi);
                    t.resolved["sigma_source"] = "bisection for k modes";
                } else if (cf.sigma == "auto") {
                    sigma = bandwidth_knn_heuristic(x, 7);
                    t.resolved["sigma_source"] = "7-NN heuristic";
                } else {
                    sigma = parse_positive(cf.sigma, "--sigma");
                    t.resolved["sigma_source"] = "given";
                }
                MeanShiftOptions<double> opts;
                opts.tol = cf.tol.cstep_rel_tol * sigma;
                opts.max_iter = cf.tol.max_cstep_iters;
                const auto res = gms_cluster(x, sigma, 0.0, opts);
                t.model = hard_model(x, res.modes.centers, sigma, res.labels);
                t.resolved["sigma"] = sigma;
            }
            if (!t.timings.contains("total_s")) t.timings["total_s"] = seconds_since(t0);
            if (t.model.history.empty()) t.model.history = {t.model.objective};
            check_finite(t.model);
            t.resolved["algo"] = algo;
            t.resolved["K"] = t.model.hyper.k;
            t.resolved["lambda"] = t.model.hyper.lambda;

            const Labels labels = harden(t.model.assignments);
            save_model(clu_model, t.model);
            write_labels_csv(clu_labels.empty() ? sibling(clu_model, ".labels.csv") : clu_labels, labels);
            write_csv(clu_soft.empty() ? sibling(clu_model, ".soft.csv") : clu_soft, t.model.assignments);

            json report;
            report["command"] = "cluster";
            report["config"] = JsonConfig::record(&app, true);
            report["resolved"] = t.resolved;
            report["result"] = model_summary(t.model);
            if (data.labels) {
                report["result"]["accuracy"] = accuracy(labels, *data.labels);
                report["result"]["nmi"] = nmi(labels, *data.labels);
            }
            report["timings"] = t.timings;
            write_json(clu_report.empty() ? sibling(clu_model, ".report.json") : clu_report, report);
            return 0;
        }

        if (pre->parsed()) {
            const auto model = load_model(pre_model);
            const auto data = load_csv(pre_data, pre_labeled);
            if (data.points.cols() != model.centroids.d()) throw_data("points have a different dimension than the model");
            const Matrix<double> soft = oos_predict_batch(model, data.points);
            const Labels hard = harden(soft);
            write_csv(pre_out, soft, &hard);
            return 0;
        }

        if (ev->parsed()) {
            Labels pred = load_labels_csv(ev_pred);
            Labels truth = load_labels_csv(ev_truth);
            if (pred.size() != truth.size()) throw_data("prediction and truth have different lengths");
            if (inliers_only) {
                Labels p, q;
                for (std::size_t i = 0; i < truth.size(); ++i) {
                    if (truth[i] >= 0) {
                        p.push_back(pred[i]);
                        q.push_back(truth[i]);
                    }
                }
                pred.swap(p);
                truth.swap(q);
            }
            const NmiNorm norm = nmi_norm == "max" ? NmiNorm::max : nmi_norm == "avg" ? NmiNorm::avg : NmiNorm::sqrt;
            std::ostringstream out;
            out.precision(17);
            if (metric != "nmi") out << "acc " << accuracy(pred, truth) << '\n';
            if (metric != "acc") out << "nmi " << nmi(pred, truth, norm) << '\n';
            std::cout << out.str();
            return 0;
        }

        if (seg->parsed()) {
            const GrayImage image = read_pgm(seg_image);
            std::optional<GrayImage> mask_image;
            if (!seg_mask.empty()) {
                mask_image = read_pgm(seg_mask);
                if (mask_image->rows != image.rows || mask_image->cols != image.cols) throw_data("mask size does not match the image");
            }
            const auto data = pixel_features(image);
            GraphSpec gs;
            gs.grid8 = true;
            gs.grid_rows = image.rows;
            gs.grid_cols = image.cols;
            auto t = train_lapkm(data.points, sf, gs, false);
            check_finite(t.model);
            const Labels labels = harden(t.model.assignments);
            write_pgm(seg_out, label_image(labels, image.rows, image.cols, static_cast<int>(sf.k)));
            if (!seg_model.empty()) save_model(seg_model, t.model);

            json report;
            report["command"] = "segment";
            report["config"] = JsonConfig::record(&app, true);
            report["resolved"] = t.resolved;
            report["result"] = model_summary(t.model);
            if (mask_image) {
                std::vector<bool> mask(mask_image->pixels.size());
                for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask_image->pixels[i] != 0;
                const double err = occluder_error(labels, mask);
                report["result"]["occluder_error"] = err;
                std::ostringstream out;
                out.precision(17);
                out << "occluder_error " << err << '\n';
                std::cout << out.str();
            }
            report["timings"] = t.timings;
            if (!seg_report.empty()) write_json(seg_report, report);
            return 0;
        }

        if (kg->parsed()) {
            const auto model = load_model(kg_model);
            if (model.training_data.cols() != 2) throw_usage("kde-grid needs a model over 2-D data");
            if (resolution < 1) throw_usage("--resolution must be at least 1");
            if (is_infinite_bandwidth(model.centroids.sigma)) throw_usage("kde-grid needs a model with a finite sigma");
            const Matrix<double>& x = model.training_data;
            double x0 = x.col(0).minCoeff(), x1 = x.col(0).maxCoeff(), y0 = x.col(1).minCoeff(), y1 = x.col(1).maxCoeff();
            if (!bounds.empty()) {
                x0 = bounds[0], x1 = bounds[1], y0 = bounds[2], y1 = bounds[3];
                if (!(x1 >= x0) || !(y1 >= y0)) throw_usage("--bounds: need xmin <= xmax and ymin <= ymax");
            }
            const Index kk = model.centroids.k();
            std::vector<std::unique_ptr<Kde<double>>> kdes;
            for (Index k = 0; k < kk; ++k) {
                const Vector<double> w = model.assignments.col(k);
                const double mass = w.sum();
                kdes.push_back(mass > 0 ? std::make_unique<Kde<double>>(x, Vector<double>(w / mass), model.centroids.sigma) : nullptr);
            }
            const Index nodes = static_cast<Index>(resolution) * resolution;
            Matrix<double> grid(nodes, 2);
            auto coord = [&](double lo, double hi, int i) { return resolution == 1 ? lo : lo + (hi - lo) * i / (resolution - 1); };
            for (int i = 0; i < resolution; ++i) {
                for (int j = 0; j < resolution; ++j) grid.row(static_cast<Index>(i) * resolution + j) << coord(x0, x1, j), coord(y0, y1, i);
            }
            const Matrix<double> z = oos_predict_batch(model, grid);
            Matrix<double> rows(nodes, 2 + 2 * kk);
            parallel_for(0, nodes, [&](std::ptrdiff_t n) {
                rows(n, 0) = grid(n, 0);
                rows(n, 1) = grid(n, 1);
                for (Index k = 0; k < kk; ++k) {
                    const auto& kde = kdes[static_cast<std::size_t>(k)];
                    rows(n, 2 + k) = kde ? kde_eval(*kde, grid.row(n).transpose()) : 0.0;
                    rows(n, 2 + kk + k) = z(n, k);
                }
            });
            std::ofstream out(kg_out, std::ios::binary);
            if (!out) throw_data("cannot write " + kg_out.string());
            out << "x,y";
            for (Index k = 0; k < kk; ++k) out << ",p" << k + 1;
            for (Index k = 0; k < kk; ++k) out << ",z" << k + 1;
            out << '\n';
            write_csv(out, rows);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::usage: return 2;
            case ErrorKind::data: return 3;
            case ErrorKind::numerical: return 4;
        }
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
