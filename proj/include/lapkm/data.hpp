#pragma once

#include "lapkm/core.hpp"
#include "lapkm/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace lapkm {

/// Reads a comma-separated numeric table ('.' decimal, LF or CRLF). A first row whose
/// cells are all non-numeric is taken as a header. With `has_labels` the last column
/// holds integer class ids (-1 allowed for unlabeled points).
Dataset load_csv(const std::filesystem::path& path, bool has_labels);
Dataset parse_csv(std::istream& in, bool has_labels);

/// Writes rows with round-trip precision; labels, if present, become a last column.
void write_csv(const std::filesystem::path& path, const Matrix<double>& rows, const Labels* labels = nullptr);
void write_csv(std::ostream& out, const Matrix<double>& rows, const Labels* labels = nullptr);

/// One integer label per line (a non-numeric first line is skipped as a header).
Labels load_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const Labels& labels);

/// Edge list "src,dst,weight" (src < dst) for inspecting a graph.
void write_edge_list(const std::filesystem::path& path, const AffinityGraph<double>& graph);

/// Rescales every row to unit Euclidean norm. Zero rows are rejected.
template <typename Scalar>
DataMatrix<Scalar> normalize_unit_rows(const DataMatrix<Scalar>& data) {
    DataMatrix<Scalar> out = data;
    for (Index n = 0; n < out.n(); ++n) {
        const Scalar norm = out.points.row(n).norm();
        if (!(norm > Scalar(0))) throw_data("normalize_unit_rows: row " + std::to_string(n) + " is all zeros");
        out.points.row(n) /= norm;
    }
    return out;
}

/// Mean over all points of the distance to their k-th nearest neighbour (self excluded).
template <typename Scalar>
Scalar bandwidth_knn_heuristic(const Matrix<Scalar>& points, int k = 7) {
    if (k < 1) throw_usage("bandwidth heuristic: k must be at least 1");
    if (points.rows() <= k) throw_usage("bandwidth heuristic: need more than k points");
    std::vector<Scalar> kth(static_cast<std::size_t>(points.rows()));
    parallel_for(0, points.rows(), [&](std::ptrdiff_t i) {
        std::vector<Scalar> d2;
        d2.reserve(static_cast<std::size_t>(points.rows()));
        for (Index j = 0; j < points.rows(); ++j) {
            if (j != i) d2.push_back((points.row(i) - points.row(j)).squaredNorm());
        }
        std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
        kth[static_cast<std::size_t>(i)] = std::sqrt(d2[static_cast<std::size_t>(k - 1)]);
    });
    Scalar total = 0;
    for (Scalar v : kth) total += v;
    return total / Scalar(points.rows());
}

enum class SyntheticKind { spirals, moons };

/// Spirals: 5 Archimedean arms r = 0.5 + 0.35 theta, theta evenly spaced over
/// [0.25 pi, 5.25 pi] (2.5 turns), arm k rotated by 2 pi k / 5, labels 0-4.
/// Moons: the usual interleaved half circles of radius 1, upper arc centred at the
/// origin, lower arc at (1, 0.5), plus `outliers` uniform points over the inliers'
/// bounding box inflated by 25% and labelled -1.
/// Gaussian noise of sd noise_sd is added to every inlier coordinate; a negative
/// noise_sd selects the per-kind default.
struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::spirals;
    int points_per_cluster = 400;
    int outliers = 0;
    double noise_sd = -1;
    std::uint64_t seed = 0;
};

inline constexpr double kSpiralDefaultNoise = 0.02;
inline constexpr double kMoonsDefaultNoise = 0.1;

Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace lapkm
