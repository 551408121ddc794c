#include "lapkm/model_io.hpp"

#include <fstream>

namespace lapkm {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix<double>& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix<double> matrix_from_json(const json& rows, const char* what) {
    if (!rows.is_array()) throw_data(std::string("model: '") + what + "' must be an array of rows");
    const auto n = static_cast<Index>(rows.size());
    const auto d = n == 0 ? Index{0} : static_cast<Index>(rows.at(0).size());
    Matrix<double> m(n, d);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Index>(row.size()) != d) throw_data(std::string("model: '") + what + "' is ragged");
        for (Index j = 0; j < d; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return m;
}

json bandwidth_to_json(double sigma) {
    if (is_infinite_bandwidth(sigma)) return "inf";
    return sigma;
}

double bandwidth_from_json(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return infinite_bandwidth<double>();
        throw_data("model: bandwidth must be a number or \"inf\"");
    }
    return v.get<double>();
}

}  // namespace

json graph_spec_to_json(const GraphSpec& spec) {
    json g;
    g["k"] = spec.k;
    g["weighting"] = spec.weighting == Weighting::heat ? "heat" : "binary";
    g["heat_width"] = spec.heat_width ? json(*spec.heat_width) : json(nullptr);
    g["grid8"] = spec.grid8;
    g["grid_rows"] = spec.grid_rows;
    g["grid_cols"] = spec.grid_cols;
    return g;
}

GraphSpec graph_spec_from_json(const json& g) {
    GraphSpec spec;
    spec.k = g.at("k").get<int>();
    const auto w = g.at("weighting").get<std::string>();
    if (w != "heat" && w != "binary") throw_data("model: unknown weighting '" + w + "'");
    spec.weighting = w == "heat" ? Weighting::heat : Weighting::binary;
    if (g.contains("heat_width") && !g.at("heat_width").is_null()) spec.heat_width = g.at("heat_width").get<double>();
    spec.grid8 = g.value("grid8", false);
    spec.grid_rows = g.value("grid_rows", Index{0});
    spec.grid_cols = g.value("grid_cols", Index{0});
    return spec;
}

json model_to_json(const LapKModesModel<double>& model) {
    json doc;
    doc["version"] = kModelVersion;
    doc["hyperparams"] = {
        {"K", model.hyper.k},
        {"lambda", model.hyper.lambda},
        {"sigma", bandwidth_to_json(model.hyper.sigma)},
        {"graph", graph_spec_to_json(model.hyper.graph)},
    };
    doc["tolerances"] = {
        {"cstep_rel_tol", model.tol.cstep_rel_tol},   {"max_cstep_iters", model.tol.max_cstep_iters},
        {"zstep_tol", model.tol.zstep_tol},           {"max_zstep_iters", model.tol.max_zstep_iters},
        {"outer_tol", model.tol.outer_tol},           {"max_outer", model.tol.max_outer},
    };
    doc["centroids"] = matrix_to_json(model.centroids.centers);
    doc["centroid_sigma"] = bandwidth_to_json(model.centroids.sigma);
    doc["assignments"] = matrix_to_json(model.assignments);
    doc["training_data"] = matrix_to_json(model.training_data);
    doc["objective"] = model.objective;
    doc["objective_history"] = model.history;
    json stages = json::array();
    for (const auto& s : model.stages) {
        stages.push_back({{"sigma", s.sigma}, {"lambda", s.lambda}, {"objective", s.objective}, {"alternations", s.alternations}});
    }
    doc["stages"] = stages;
    json frozen = json::array();
    for (std::size_t k = 0; k < model.frozen.size(); ++k) {
        if (model.frozen[k]) frozen.push_back(k);
    }
    doc["flags"] = {{"frozen_clusters", frozen}, {"converged", model.converged}, {"alternations", model.alternations}};
    return doc;
}

LapKModesModel<double> model_from_json(const json& doc) {
    try {
        if (doc.value("version", std::string()) != kModelVersion) {
            throw_data(std::string("model: expected version \"") + kModelVersion + "\"");
        }
        LapKModesModel<double> m;
        const auto& h = doc.at("hyperparams");
        m.hyper.k = h.at("K").get<Index>();
        m.hyper.lambda = h.at("lambda").get<double>();
        m.hyper.sigma = bandwidth_from_json(h.at("sigma"));
        m.hyper.graph = graph_spec_from_json(h.at("graph"));
        const auto& t = doc.at("tolerances");
        m.tol.cstep_rel_tol = t.at("cstep_rel_tol").get<double>();
        m.tol.max_cstep_iters = t.at("max_cstep_iters").get<int>();
        m.tol.zstep_tol = t.at("zstep_tol").get<double>();
        m.tol.max_zstep_iters = t.at("max_zstep_iters").get<int>();
        m.tol.outer_tol = t.at("outer_tol").get<double>();
        m.tol.max_outer = t.at("max_outer").get<int>();
        m.centroids.centers = matrix_from_json(doc.at("centroids"), "centroids");
        m.centroids.sigma = doc.contains("centroid_sigma") ? bandwidth_from_json(doc.at("centroid_sigma")) : m.hyper.sigma;
        m.assignments = matrix_from_json(doc.at("assignments"), "assignments");
        m.training_data = matrix_from_json(doc.at("training_data"), "training_data");
        m.objective = doc.at("objective").get<double>();
        m.history = doc.at("objective_history").get<std::vector<double>>();
        for (const auto& s : doc.value("stages", json::array())) {
            m.stages.push_back({s.at("sigma").get<double>(), s.at("lambda").get<double>(), s.at("objective").get<double>(),
                                s.at("alternations").get<int>()});
        }
        m.frozen.assign(static_cast<std::size_t>(m.hyper.k), false);
        const auto& flags = doc.at("flags");
        for (const auto& k : flags.at("frozen_clusters")) m.frozen.at(k.get<std::size_t>()) = true;
        m.converged = flags.value("converged", false);
        m.alternations = flags.value("alternations", 0);

        if (m.centroids.k() != m.hyper.k) throw_data("model: centroid count does not match K");
        if (m.assignments.rows() != m.training_data.rows() || m.assignments.cols() != m.hyper.k) {
            throw_data("model: assignments shape does not match training data and K");
        }
        if (m.centroids.d() != m.training_data.cols()) throw_data("model: centroid dimension does not match training data");
        return m;
    } catch (const json::exception& e) {
        throw_data(std::string("model: malformed document: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const LapKModesModel<double>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot write " + path.string());
    out << model_to_json(model).dump(1) << '\n';
}

LapKModesModel<double> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_data("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw_data("model: " + path.string() + " is not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace lapkm
