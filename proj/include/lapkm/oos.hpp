#pragma once

#include "lapkm/core.hpp"
#include "lapkm/graph.hpp"
#include "lapkm/parallel.hpp"
#include "lapkm/simplex.hpp"
#include "lapkm/trainer.hpp"

namespace lapkm {

/// Closed-form pieces of the out-of-sample problem: the assignment is the simplex
/// projection of z_bar + gamma * q. An infinite gamma means the Laplacian term is absent
/// (lambda = 0, or no affinity to any training point) and the answer is the vertex at
/// argmax q.
template <typename Scalar>
struct OosDecomposition {
    /// Affinity-weighted average of the neighbours' training assignments.
    Vector<Scalar> z_bar;
    /// Normalized data-centroid kernel values.
    Vector<Scalar> q;
    Scalar gamma = 0;
    /// Affinities to the training points that were used (index, w_n).
    std::vector<std::pair<Index, Scalar>> neighbors;

    bool gamma_infinite() const { return std::isinf(gamma); }
};

namespace detail {

/// Test-point affinities follow the training graph rule: the k nearest training points
/// (8 for pixel-lattice models) weighted by the training heat kernel or set to 1.
template <typename Scalar, typename Derived>
std::vector<std::pair<Index, Scalar>> test_affinities(const LapKModesModel<Scalar>& model,
                                                      const Eigen::MatrixBase<Derived>& x) {
    const auto& spec = model.hyper.graph;
    const auto& train = model.training_data;
    const int k = spec.grid8 ? 8 : spec.k;
    const Index take = std::min<Index>(k, train.rows());
    std::vector<std::pair<Scalar, Index>> cand;
    cand.reserve(static_cast<std::size_t>(train.rows()));
    for (Index n = 0; n < train.rows(); ++n) cand.emplace_back((train.row(n).transpose() - x).squaredNorm(), n);
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    std::vector<std::pair<Index, Scalar>> out;
    out.reserve(static_cast<std::size_t>(take));
    Scalar width = Scalar(1);
    if (spec.weighting == Weighting::heat) {
        if (!spec.heat_width) throw_usage("oos: model graph has no resolved heat width");
        width = static_cast<Scalar>(*spec.heat_width);
    }
    for (Index i = 0; i < take; ++i) {
        const auto [d2, n] = cand[static_cast<std::size_t>(i)];
        out.emplace_back(n, edge_weight(spec.weighting, d2, width));
    }
    return out;
}

}  // namespace detail

/// Decomposes the out-of-sample problem for test point x into (z_bar, q, gamma).
/// For finite sigma, q_k is G(|(x - c_k)/sigma|^2) normalized over k, computed with a
/// shifted exponent so it stays defined when every kernel value underflows, and
/// gamma = sum_k G / (2 lambda sum_n w_n). In the K-means limit the centroid term is
/// -|x - c_k|^2, which is shifted to be nonnegative before normalizing; the shift does
/// not change the projection.
template <typename Scalar, typename Derived>
OosDecomposition<Scalar> oos_decompose(const LapKModesModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x_in) {
    const Vector<Scalar> x = x_in.derived().template cast<Scalar>();
    const auto& c = model.centroids;
    if (x.size() != c.d()) throw_usage("oos: test point dimension does not match the model");
    const Index kk = c.k();

    OosDecomposition<Scalar> dec;
    dec.neighbors = detail::test_affinities(model, x);
    Scalar wsum = 0;
    dec.z_bar = Vector<Scalar>::Zero(kk);
    for (const auto& [n, w] : dec.neighbors) {
        wsum += w;
        dec.z_bar += w * model.assignments.row(n).transpose();
    }
    if (wsum > Scalar(0)) {
        dec.z_bar /= wsum;
    } else {
        dec.z_bar = Vector<Scalar>::Constant(kk, Scalar(1) / Scalar(kk));
    }

    Vector<Scalar> d2(kk);
    for (Index k = 0; k < kk; ++k) d2(k) = (x - c.centers.row(k).transpose()).squaredNorm();

    Scalar mass = 0;
    if (is_infinite_bandwidth(c.sigma)) {
        const Vector<Scalar> shifted = (d2.maxCoeff() - d2.array()).matrix();
        mass = shifted.sum();
        dec.q = mass > Scalar(0) ? Vector<Scalar>(shifted / mass) : Vector<Scalar>::Constant(kk, Scalar(1) / Scalar(kk));
    } else {
        const Vector<Scalar> expo = -d2 / (Scalar(2) * c.sigma * c.sigma);
        const Scalar top = expo.maxCoeff();
        const Vector<Scalar> rel = (expo.array() - top).exp().matrix();
        dec.q = rel / rel.sum();
        mass = std::exp(top) * rel.sum();
    }

    const Scalar lambda = model.hyper.lambda;
    if (lambda == Scalar(0) || !(wsum > Scalar(0))) {
        dec.gamma = std::numeric_limits<Scalar>::infinity();
    } else {
        dec.gamma = mass / (Scalar(2) * lambda * wsum);
    }
    return dec;
}

/// Out-of-sample soft assignment: project(z_bar + gamma q), or the vertex at argmax q
/// when gamma is infinite. Cost O(N D) per point.
template <typename Scalar, typename Derived>
Vector<Scalar> oos_predict(const LapKModesModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
    const Index kk = model.centroids.k();
    if (kk == 1) return Vector<Scalar>::Ones(1);
    const auto dec = oos_decompose(model, x);
    if (dec.gamma_infinite()) {
        Vector<Scalar> z = Vector<Scalar>::Zero(kk);
        z(argmax_lowest(dec.q)) = Scalar(1);
        return z;
    }
    return project_simplex(dec.z_bar + dec.gamma * dec.q);
}

/// Row-wise oos_predict over a batch of points.
template <typename Scalar>
Matrix<Scalar> oos_predict_batch(const LapKModesModel<Scalar>& model, const Matrix<Scalar>& points) {
    Matrix<Scalar> out(points.rows(), model.centroids.k());
    parallel_for(0, points.rows(), [&](std::ptrdiff_t i) {
        out.row(i) = oos_predict(model, points.row(i).transpose()).transpose();
    });
    return out;
}

/// Exact minimizer over row n alone, all other rows fixed: the out-of-sample closed form
/// with the training graph's affinities, project(z_bar_n + b_n / (2 lambda d_n)).
/// Isolated rows and lambda = 0 take the vertex at argmax b_n.
template <typename Scalar>
Vector<Scalar> oos_row_solution(const AffinityGraph<Scalar>& graph, const Matrix<Scalar>& b, Scalar lambda,
                                const Matrix<Scalar>& z, Index n) {
    using Sparse = typename AffinityGraph<Scalar>::SparseMatrix;
    const Scalar degree = graph.degrees()(n);
    if (lambda == Scalar(0) || !(degree > Scalar(0))) {
        Vector<Scalar> v = Vector<Scalar>::Zero(b.cols());
        v(argmax_lowest(b.row(n))) = Scalar(1);
        return v;
    }
    Vector<Scalar> z_bar = Vector<Scalar>::Zero(b.cols());
    for (typename Sparse::InnerIterator it(graph.weights(), n); it; ++it) {
        z_bar += it.value() * z.row(it.col()).transpose();
    }
    z_bar /= degree;
    return project_simplex(z_bar + b.row(n).transpose() / (Scalar(2) * lambda * degree));
}

template <typename Scalar>
struct SweepOptions {
    /// Stop when one full sweep lowers the objective by less than this.
    Scalar tol = Scalar(1e-8);
    int max_sweeps = 100000;
};

template <typename Scalar>
struct SweepReport {
    int sweeps = 0;
    bool converged = false;
    Scalar objective = 0;
};

/// Z-step by block coordinate descent: sweeps the rows in index order, replacing each by
/// its exact row minimizer. No row update increases the objective.
template <typename Scalar>
Matrix<Scalar> oos_sweep(const AffinityGraph<Scalar>& graph, const Matrix<Scalar>& b, Scalar lambda,
                         Matrix<Scalar> z, const SweepOptions<Scalar>& opts = {},
                         SweepReport<Scalar>* report = nullptr) {
    if (z.rows() != b.rows() || z.cols() != b.cols() || graph.n() != b.rows()) {
        throw_usage("oos_sweep: shapes of graph, B and Z disagree");
    }
    if (!is_row_stochastic(z, Scalar(1e-8))) throw_usage("oos_sweep: Z is not row-stochastic");
    SweepReport<Scalar> rep;
    Scalar f = objective(graph, z, b, lambda);
    for (int s = 0; s < opts.max_sweeps; ++s) {
        for (Index n = 0; n < z.rows(); ++n) z.row(n) = oos_row_solution(graph, b, lambda, z, n).transpose();
        const Scalar next = objective(graph, z, b, lambda);
        rep.sweeps = s + 1;
        const Scalar drop = f - next;
        f = next;
        if (drop < opts.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.objective = f;
    if (report) *report = rep;
    return z;
}

/// Re-solves the Z-step of a trained model by sweeping the out-of-sample mapping over the
/// training points, starting from the model's assignments. The training graph is rebuilt
/// from the embedded data and the model's graph spec.
template <typename Scalar>
Matrix<Scalar> zstep_by_oos_sweep(const LapKModesModel<Scalar>& model, const SweepOptions<Scalar>& opts = {},
                                  SweepReport<Scalar>* report = nullptr) {
    const auto graph = build_knn_graph(model.training_data, model.hyper.graph);
    const auto b = compute_B(model.training_data, model.centroids);
    return oos_sweep(graph, b, model.hyper.lambda, model.assignments, opts, report);
}

}  // namespace lapkm
