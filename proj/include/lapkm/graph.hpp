#pragma once

#include "lapkm/core.hpp"
#include "lapkm/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <algorithm>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace lapkm {

enum class Weighting { binary, heat };

/// How to build the affinity graph. An unset heat_width means "use the kde bandwidth".
struct GraphSpec {
    int k = 5;
    Weighting weighting = Weighting::heat;
    std::optional<double> heat_width;
    bool grid8 = false;
    Index grid_rows = 0;
    Index grid_cols = 0;
};

/// Resolves the "auto" heat width against the kde bandwidth. An infinite bandwidth
/// cannot serve as a width, so `fallback` (normally the k-NN bandwidth heuristic) is used.
inline GraphSpec resolve_heat_width(GraphSpec spec, double sigma, double fallback) {
    if (spec.weighting == Weighting::heat && !spec.heat_width) {
        spec.heat_width = is_infinite_bandwidth(sigma) ? fallback : sigma;
    }
    return spec;
}

template <typename Scalar>
struct Edge {
    Index src;
    Index dst;
    Scalar weight;
};

/// Sparse symmetric affinity matrix W with its degree vector and the cached largest
/// eigenvalue M of L = D - W. Immutable after construction.
template <typename Scalar>
class AffinityGraph {
public:
    using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

    AffinityGraph() = default;

    /// Symmetrizes by union: a pair listed in either direction becomes an undirected
    /// edge whose weight is the larger of the listed weights. Self-loops are dropped.
    static AffinityGraph from_edges(Index n, const std::vector<Edge<Scalar>>& edges) {
        std::vector<Edge<Scalar>> sym;
        sym.reserve(edges.size() * 2);
        for (const auto& e : edges) {
            if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n) {
                throw_usage("AffinityGraph: edge endpoint out of range");
            }
            if (!(e.weight >= Scalar(0)) || !std::isfinite(e.weight)) {
                throw_usage("AffinityGraph: weights must be finite and nonnegative");
            }
            if (e.src == e.dst) continue;
            sym.push_back(e);
            sym.push_back({e.dst, e.src, e.weight});
        }
        std::sort(sym.begin(), sym.end(), [](const auto& a, const auto& b) {
            return a.src != b.src ? a.src < b.src : a.dst < b.dst;
        });
        std::vector<Eigen::Triplet<Scalar>> triplets;
        triplets.reserve(sym.size());
        for (std::size_t i = 0; i < sym.size();) {
            std::size_t j = i;
            Scalar w = sym[i].weight;
            while (j < sym.size() && sym[j].src == sym[i].src && sym[j].dst == sym[i].dst) {
                w = std::max(w, sym[j].weight);
                ++j;
            }
            triplets.emplace_back(sym[i].src, sym[i].dst, w);
            i = j;
        }
        AffinityGraph g;
        g.weights_.resize(n, n);
        g.weights_.setFromTriplets(triplets.begin(), triplets.end());
        g.weights_.makeCompressed();
        g.degrees_ = Vector<Scalar>::Zero(n);
        for (Index m = 0; m < n; ++m) {
            for (typename SparseMatrix::InnerIterator it(g.weights_, m); it; ++it) g.degrees_(m) += it.value();
        }
        g.largest_eig_ = compute_largest_eigenvalue(g);
        return g;
    }

    Index n() const { return weights_.rows(); }
    const SparseMatrix& weights() const { return weights_; }
    const Vector<Scalar>& degrees() const { return degrees_; }
    Index edge_count() const { return weights_.nonZeros() / 2; }
    Scalar max_degree() const { return n() == 0 ? Scalar(0) : degrees_.maxCoeff(); }

    /// Cached largest eigenvalue of the Laplacian (computed once at construction).
    Scalar largest_eigenvalue() const { return largest_eig_; }

    /// Edge list with src < dst, in row order.
    std::vector<Edge<Scalar>> edges() const {
        std::vector<Edge<Scalar>> out;
        for (Index m = 0; m < n(); ++m) {
            for (typename SparseMatrix::InnerIterator it(weights_, m); it; ++it) {
                if (it.col() > m) out.push_back({m, it.col(), it.value()});
            }
        }
        return out;
    }

    Matrix<Scalar> dense_laplacian() const {
        Matrix<Scalar> l = -Matrix<Scalar>(weights_);
        l.diagonal() += degrees_;
        return l;
    }

private:
    static Scalar compute_largest_eigenvalue(const AffinityGraph& g);

    SparseMatrix weights_;
    Vector<Scalar> degrees_;
    Scalar largest_eig_ = 0;
};

/// L Z = D Z - W Z via sparse traversal, O(N K rho).
template <typename Scalar, typename Derived>
Matrix<Scalar> apply_laplacian(const AffinityGraph<Scalar>& graph, const Eigen::MatrixBase<Derived>& z) {
    if (z.rows() != graph.n()) throw_usage("apply_laplacian: row count does not match graph size");
    Matrix<Scalar> out = graph.degrees().asDiagonal() * z;
    out.noalias() -= graph.weights() * z;
    return out;
}

/// (1/2) sum_{m,n} w_mn |z_m - z_n|^2, accumulated edge-wise. Equals trace(Z^T L Z).
template <typename Scalar, typename Derived>
Scalar laplacian_quadratic(const AffinityGraph<Scalar>& graph, const Eigen::MatrixBase<Derived>& z) {
    if (z.rows() != graph.n()) throw_usage("laplacian_quadratic: row count does not match graph size");
    using Sparse = typename AffinityGraph<Scalar>::SparseMatrix;
    Scalar total = 0;
    for (Index m = 0; m < graph.n(); ++m) {
        for (typename Sparse::InnerIterator it(graph.weights(), m); it; ++it) {
            total += it.value() * (z.row(m) - z.row(it.col())).squaredNorm();
        }
    }
    return total / Scalar(2);
}

/// Largest eigenvalue of L. Lanczos iteration (a Krylov-accelerated power iteration)
/// with full reorthogonalization, started from a fixed pseudo-random unit vector. Stops
/// when the Ritz residual bound falls below 1e-10 relative, the Krylov space becomes
/// invariant, or after 300 steps. The result is clamped to [0, 2 * max degree].
/// Plain power iteration stalls when the top two eigenvalues are close.
template <typename Scalar>
Scalar largest_eigenvalue(const AffinityGraph<Scalar>& graph) {
    const Index n = graph.n();
    if (n == 0 || graph.weights().nonZeros() == 0) return Scalar(0);
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::mt19937_64 rng(0x6c61706b6dULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Vector<Scalar> v(n);
    for (Index i = 0; i < n; ++i) v(i) = static_cast<Scalar>(unit(rng));
    v.normalize();

    const Index max_dim = std::min<Index>(n, 300);
    std::vector<Vector<Scalar>> basis;
    std::vector<Scalar> alpha;
    std::vector<Scalar> beta;
    Scalar theta = 0;
    for (Index j = 0; j < max_dim; ++j) {
        basis.push_back(v);
        Vector<Scalar> w = apply_laplacian(graph, v);
        alpha.push_back(v.dot(w));
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) w -= q.dot(w) * q;
        }
        const Scalar b = w.norm();
        beta.push_back(b);

        const Index dim = j + 1;
        const bool last = dim == max_dim;
        const bool invariant = b <= Scalar(1e-12) * std::max(std::abs(alpha.front()), Scalar(1));
        if (last || invariant || dim % 4 == 0) {
            Vector<Scalar> diag = Eigen::Map<const Vector<Scalar>>(alpha.data(), dim);
            Vector<Scalar> sub = Eigen::Map<const Vector<Scalar>>(beta.data(), dim - 1);
            Eigen::SelfAdjointEigenSolver<Dense> es;
            es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            theta = es.eigenvalues()(dim - 1);
            const Scalar residual = b * std::abs(es.eigenvectors()(dim - 1, dim - 1));
            if (last || invariant || residual <= Scalar(1e-10) * std::abs(theta)) break;
        }
        v = w / b;
    }
    return std::clamp(theta, Scalar(0), Scalar(2) * graph.max_degree());
}

template <typename Scalar>
Scalar AffinityGraph<Scalar>::compute_largest_eigenvalue(const AffinityGraph& g) {
    return lapkm::largest_eigenvalue(g);
}

namespace detail {

template <typename Scalar>
Scalar edge_weight(Weighting weighting, Scalar squared_distance, Scalar width) {
    if (weighting == Weighting::binary) return Scalar(1);
    return std::exp(-squared_distance / (Scalar(2) * width * width));
}

template <typename Scalar>
Scalar checked_width(const GraphSpec& spec) {
    if (spec.weighting == Weighting::binary) return Scalar(1);
    if (!spec.heat_width) throw_usage("graph: heat weighting needs a resolved heat width");
    if (!(*spec.heat_width > 0) || !std::isfinite(*spec.heat_width)) throw_usage("graph: heat width must be positive");
    return static_cast<Scalar>(*spec.heat_width);
}

}  // namespace detail

/// Indices of the k nearest rows of `points` to row `i` (self excluded), nearest first,
/// ties broken by index.
template <typename Scalar>
std::vector<std::pair<Scalar, Index>> nearest_rows(const Matrix<Scalar>& points, Index i, int k) {
    std::vector<std::pair<Scalar, Index>> cand;
    cand.reserve(static_cast<std::size_t>(points.rows()));
    for (Index j = 0; j < points.rows(); ++j) {
        if (j == i) continue;
        cand.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    cand.resize(take);
    return cand;
}

/// Feature-space k-NN graph (or the 8-connected pixel lattice when spec.grid8),
/// symmetrized by union. Heat weights exp(-|x_m - x_n|^2 / (2 h^2)); binary weights 1.
template <typename Scalar>
AffinityGraph<Scalar> build_knn_graph(const Matrix<Scalar>& points, const GraphSpec& spec) {
    const Scalar width = detail::checked_width<Scalar>(spec);
    const Index n = points.rows();
    std::vector<Edge<Scalar>> edges;

    if (spec.grid8) {
        const Index rows = spec.grid_rows;
        const Index cols = spec.grid_cols;
        if (rows <= 0 || cols <= 0 || rows * cols != n) throw_usage("graph: grid dimensions do not match point count");
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                const Index m = r * cols + c;
                for (Index dr = -1; dr <= 1; ++dr) {
                    for (Index dc = -1; dc <= 1; ++dc) {
                        const Index rr = r + dr;
                        const Index cc = c + dc;
                        if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                        const Index o = rr * cols + cc;
                        if (o < m) continue;
                        const Scalar d2 = (points.row(m) - points.row(o)).squaredNorm();
                        edges.push_back({m, o, detail::edge_weight(spec.weighting, d2, width)});
                    }
                }
            }
        }
        return AffinityGraph<Scalar>::from_edges(n, edges);
    }

    if (spec.k < 1) throw_usage("graph: k must be at least 1");
    if (spec.k >= n) throw_usage("graph: k must be smaller than the number of points");

    std::vector<std::vector<std::pair<Scalar, Index>>> neighbors(static_cast<std::size_t>(n));
    parallel_for(0, n, [&](std::ptrdiff_t i) {
        neighbors[static_cast<std::size_t>(i)] = nearest_rows(points, i, spec.k);
    });
    edges.reserve(static_cast<std::size_t>(n * spec.k));
    for (Index i = 0; i < n; ++i) {
        for (const auto& [d2, j] : neighbors[static_cast<std::size_t>(i)]) {
            edges.push_back({i, j, detail::edge_weight(spec.weighting, d2, width)});
        }
    }
    return AffinityGraph<Scalar>::from_edges(n, edges);
}

}  // namespace lapkm
