#include "lapkm/data.hpp"

#include "lapkm/random.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace lapkm {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool parse_number(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_data("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot write " + path.string());
    return out;
}

void validate_labels(const Labels& labels) {
    std::set<int> ids;
    for (int l : labels) {
        if (l < -1) throw_data("labels: ids must be >= -1, found " + std::to_string(l));
        if (l >= 0) ids.insert(l);
    }
    int expect = 0;
    for (int id : ids) {
        if (id != expect) throw_data("labels: class ids must be contiguous from 0 (missing " + std::to_string(expect) + ")");
        ++expect;
    }
}

}  // namespace

Dataset parse_csv(std::istream& in, bool has_labels) {
    std::vector<std::vector<double>> rows;
    Labels labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto cells = split_commas(body);
        std::vector<double> values(cells.size());
        std::size_t numeric = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) numeric += parse_number(cells[i], values[i]) ? 1 : 0;
        if (first) {
            first = false;
            if (numeric == 0) continue;  // header row
        }
        if (numeric != cells.size()) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (!parse_number(cells[i], values[i])) {
                    throw_data("csv parse error at line " + std::to_string(line_no) + ", column " +
                               std::to_string(i + 1) + ": '" + std::string(cells[i]) + "' is not a finite number");
                }
            }
        }
        if (width == 0) {
            width = cells.size();
            if (has_labels && width < 2) throw_data("csv parse error at line " + std::to_string(line_no) + ": need a feature column and a label column");
        } else if (cells.size() != width) {
            throw_data("csv parse error at line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " columns, found " + std::to_string(cells.size()));
        }
        if (has_labels) {
            const double l = values.back();
            if (l != std::floor(l)) throw_data("csv parse error at line " + std::to_string(line_no) + ": label is not an integer");
            labels.push_back(static_cast<int>(l));
            values.pop_back();
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw_data("csv parse error at line " + std::to_string(line_no) + ": no data rows");

    Dataset data;
    const auto d = static_cast<Index>(rows.front().size());
    data.points.resize(static_cast<Index>(rows.size()), d);
    for (std::size_t n = 0; n < rows.size(); ++n) {
        for (Index j = 0; j < d; ++j) data.points(static_cast<Index>(n), j) = rows[n][static_cast<std::size_t>(j)];
    }
    if (has_labels) {
        validate_labels(labels);
        data.labels = std::move(labels);
    }
    return data;
}

Dataset load_csv(const std::filesystem::path& path, bool has_labels) {
    auto in = open_input(path);
    return parse_csv(in, has_labels);
}

void write_csv(std::ostream& out, const Matrix<double>& rows, const Labels* labels) {
    if (labels && static_cast<Index>(labels->size()) != rows.rows()) throw_usage("write_csv: label count does not match rows");
    out << std::setprecision(17);
    for (Index n = 0; n < rows.rows(); ++n) {
        for (Index j = 0; j < rows.cols(); ++j) {
            if (j) out << ',';
            out << rows(n, j);
        }
        if (labels) out << (rows.cols() ? "," : "") << (*labels)[static_cast<std::size_t>(n)];
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const Matrix<double>& rows, const Labels* labels) {
    auto out = open_output(path);
    write_csv(out, rows, labels);
}

Labels load_labels_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    Labels labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        double v = 0;
        if (!parse_number(body, v)) {
            if (line_no == 1) continue;
            throw_data("labels parse error at line " + std::to_string(line_no));
        }
        if (v != std::floor(v)) throw_data("labels parse error at line " + std::to_string(line_no) + ": not an integer");
        labels.push_back(static_cast<int>(v));
    }
    if (labels.empty()) throw_data("labels file " + path.string() + " is empty");
    return labels;
}

void write_labels_csv(const std::filesystem::path& path, const Labels& labels) {
    auto out = open_output(path);
    for (int l : labels) out << l << '\n';
}

void write_edge_list(const std::filesystem::path& path, const AffinityGraph<double>& graph) {
    auto out = open_output(path);
    out << "src,dst,weight\n" << std::setprecision(17);
    for (const auto& e : graph.edges()) out << e.src << ',' << e.dst << ',' << e.weight << '\n';
}

namespace {

double evenly(int i, int count, double lo, double hi) {
    if (count == 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.points_per_cluster < 1) throw_usage("generate: points per cluster must be at least 1");
    if (spec.outliers < 0) throw_usage("generate: outlier count must be nonnegative");
    const bool spirals = spec.kind == SyntheticKind::spirals;
    const double noise = spec.noise_sd >= 0 ? spec.noise_sd : (spirals ? kSpiralDefaultNoise : kMoonsDefaultNoise);
    auto rng = make_stream(spec.seed, Stream::generator);

    const int clusters = spirals ? 5 : 2;
    const int per = spec.points_per_cluster;
    const int inliers = clusters * per;
    Dataset data;
    data.points.resize(inliers + spec.outliers, 2);
    Labels labels;
    labels.reserve(static_cast<std::size_t>(inliers + spec.outliers));

    Index row = 0;
    for (int k = 0; k < clusters; ++k) {
        for (int i = 0; i < per; ++i, ++row) {
            double x = 0;
            double y = 0;
            if (spirals) {
                const double theta = EIGEN_PI * evenly(i, per, 0.25, 5.25);
                const double r = 0.5 + 0.35 * theta;
                const double phase = theta + 2.0 * EIGEN_PI * k / 5.0;
                x = r * std::cos(phase);
                y = r * std::sin(phase);
            } else {
                const double t = evenly(i, per, 0.0, EIGEN_PI);
                x = k == 0 ? std::cos(t) : 1.0 - std::cos(t);
                y = k == 0 ? std::sin(t) : 0.5 - std::sin(t);
            }
            data.points(row, 0) = x + noise * gaussian(rng);
            data.points(row, 1) = y + noise * gaussian(rng);
            labels.push_back(k);
        }
    }
    if (spec.outliers > 0) {
        const Eigen::RowVector2d lo = data.points.topRows(inliers).colwise().minCoeff();
        const Eigen::RowVector2d hi = data.points.topRows(inliers).colwise().maxCoeff();
        const Eigen::RowVector2d pad = 0.125 * (hi - lo);
        for (int i = 0; i < spec.outliers; ++i, ++row) {
            for (Index j = 0; j < 2; ++j) {
                data.points(row, j) = (lo(j) - pad(j)) + uniform01(rng) * (hi(j) - lo(j) + 2.0 * pad(j));
            }
            labels.push_back(-1);
        }
    }
    data.labels = std::move(labels);
    return data;
}

}  // namespace lapkm
