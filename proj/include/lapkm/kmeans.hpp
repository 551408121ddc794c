#pragma once

#include "lapkm/core.hpp"
#include "lapkm/parallel.hpp"
#include "lapkm/random.hpp"

#include <vector>

namespace lapkm {

/// Nearest centroid per row (squared Euclidean distance, lowest index on ties).
template <typename Scalar>
Labels nearest_centroid_labels(const Matrix<Scalar>& points, const Matrix<Scalar>& centers) {
    Labels labels(static_cast<std::size_t>(points.rows()));
    parallel_for(0, points.rows(), [&](std::ptrdiff_t n) {
        Index best = 0;
        Scalar best_d = std::numeric_limits<Scalar>::infinity();
        for (Index k = 0; k < centers.rows(); ++k) {
            const Scalar d = (points.row(n) - centers.row(k)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        labels[static_cast<std::size_t>(n)] = static_cast<int>(best);
    });
    return labels;
}

/// Sum over points of the squared distance to their assigned centroid.
template <typename Scalar>
Scalar kmeans_objective(const Matrix<Scalar>& points, const Matrix<Scalar>& centers, const Labels& labels) {
    Scalar total = 0;
    for (Index n = 0; n < points.rows(); ++n) {
        total += (points.row(n) - centers.row(labels[static_cast<std::size_t>(n)])).squaredNorm();
    }
    return total;
}

/// One-hot N x K assignment matrix from hard labels.
template <typename Scalar>
Matrix<Scalar> one_hot(const Labels& labels, Index k) {
    Matrix<Scalar> z = Matrix<Scalar>::Zero(static_cast<Index>(labels.size()), k);
    for (std::size_t n = 0; n < labels.size(); ++n) z(static_cast<Index>(n), labels[n]) = Scalar(1);
    return z;
}

template <typename Scalar>
struct KMeansResult {
    Matrix<Scalar> centers;
    Labels labels;
    Scalar objective = 0;
    int iterations = 0;
};

/// Lloyd's algorithm from given centroids: assign to the nearest centroid, move each
/// centroid to its cluster mean, repeat until the labels stop changing. Empty clusters
/// keep their centroid. When `trajectory` is set it receives the labels of every
/// assignment step, the initial one included.
template <typename Scalar>
KMeansResult<Scalar> lloyd_kmeans(const Matrix<Scalar>& points, Matrix<Scalar> centers, int max_iter = 300,
                                  std::vector<Labels>* trajectory = nullptr) {
    KMeansResult<Scalar> res;
    res.labels = nearest_centroid_labels(points, centers);
    if (trajectory) trajectory->push_back(res.labels);
    for (int it = 0; it < max_iter; ++it) {
        Matrix<Scalar> sums = Matrix<Scalar>::Zero(centers.rows(), centers.cols());
        Vector<Scalar> counts = Vector<Scalar>::Zero(centers.rows());
        for (Index n = 0; n < points.rows(); ++n) {
            const int k = res.labels[static_cast<std::size_t>(n)];
            sums.row(k) += points.row(n);
            counts(k) += Scalar(1);
        }
        for (Index k = 0; k < centers.rows(); ++k) {
            if (counts(k) > Scalar(0)) centers.row(k) = sums.row(k) / counts(k);
        }
        Labels next = nearest_centroid_labels(points, centers);
        res.iterations = it + 1;
        const bool stable = next == res.labels;
        res.labels = std::move(next);
        if (trajectory) trajectory->push_back(res.labels);
        if (stable) break;
    }
    res.centers = std::move(centers);
    res.objective = kmeans_objective(points, res.centers, res.labels);
    return res;
}

/// k-means++ seeding: first centroid uniform, then each next one drawn with probability
/// proportional to the squared distance to the nearest chosen centroid.
template <typename Scalar>
Matrix<Scalar> kmeans_plus_plus(const Matrix<Scalar>& points, Index k, std::mt19937_64& rng) {
    const Index n = points.rows();
    Matrix<Scalar> centers(k, points.cols());
    Index first = static_cast<Index>(uniform01(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    centers.row(0) = points.row(first);
    Vector<Scalar> d2(n);
    for (Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    chosen[static_cast<std::size_t>(first)] = true;

    for (Index c = 1; c < k; ++c) {
        const double total = static_cast<double>(d2.sum());
        Index pick = -1;
        if (total > 0) {
            const double target = uniform01(rng) * total;
            double running = 0;
            for (Index i = 0; i < n; ++i) {
                running += static_cast<double>(d2(i));
                if (d2(i) > Scalar(0) && running > target) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) {
                for (Index i = n - 1; i >= 0; --i) {
                    if (d2(i) > Scalar(0)) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            // Every point coincides with a chosen centroid: take the first unused row.
            for (Index i = 0; i < n; ++i) {
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[static_cast<std::size_t>(pick)] = true;
        centers.row(c) = points.row(pick);
        for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

/// Best (lowest objective) of `restarts` k-means++ seeded Lloyd runs, each from its own
/// sub-stream of `seed`.
template <typename Scalar>
KMeansResult<Scalar> kmeans_best_of(const Matrix<Scalar>& points, Index k, int restarts, std::uint64_t seed) {
    if (k < 1) throw_usage("kmeans: K must be at least 1");
    if (k > points.rows()) throw_usage("kmeans: K exceeds the number of points");
    if (restarts < 1) throw_usage("kmeans: need at least one restart");
    KMeansResult<Scalar> best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        auto rng = make_stream(seed, Stream::init, static_cast<std::uint64_t>(r));
        auto run = lloyd_kmeans(points, kmeans_plus_plus(points, k, rng));
        if (!have || run.objective < best.objective) {
            best = std::move(run);
            have = true;
        }
    }
    return best;
}

template <typename Scalar>
CentroidSet<Scalar> kmeans_init(const Matrix<Scalar>& points, Index k, int restarts, std::uint64_t seed) {
    return {kmeans_best_of(points, k, restarts, seed).centers, infinite_bandwidth<Scalar>()};
}

}  // namespace lapkm
