#pragma once

#include "lapkm/core.hpp"
#include "lapkm/density.hpp"
#include "lapkm/graph.hpp"
#include "lapkm/kmeans.hpp"
#include "lapkm/parallel.hpp"
#include "lapkm/simplex.hpp"

#include <functional>
#include <type_traits>
#include <vector>

namespace lapkm {

template <typename Scalar>
struct HyperParams {
    Index k = 2;
    Scalar lambda = 1;
    /// kde bandwidth; infinite_bandwidth() selects the K-means limit.
    Scalar sigma = 1;
    GraphSpec graph;
};

template <typename Scalar>
struct Tolerances {
    /// C-step mean-shift stops when an update moves less than cstep_rel_tol * sigma.
    Scalar cstep_rel_tol = Scalar(1e-5);
    int max_cstep_iters = 500;
    /// Z-step stops when the largest relative row change of Z falls below this.
    Scalar zstep_tol = Scalar(1e-6);
    int max_zstep_iters = 1000;
    /// Outer loop stops when the relative objective change falls below this.
    Scalar outer_tol = Scalar(1e-8);
    int max_outer = 100;
};

template <typename Scalar>
struct HomotopyStage {
    Scalar sigma = 0;
    Scalar lambda = 0;
    Scalar objective = 0;
    int alternations = 0;
};

/// Everything out-of-sample prediction needs: hyperparameters (with the graph width
/// resolved), centroids, training assignments and the training points themselves.
template <typename Scalar>
struct LapKModesModel {
    HyperParams<Scalar> hyper;
    Tolerances<Scalar> tol;
    CentroidSet<Scalar> centroids;
    Matrix<Scalar> assignments;
    Matrix<Scalar> training_data;
    Scalar objective = 0;
    std::vector<Scalar> history;
    /// Clusters that held (numerically) no assignment mass and kept their centroid.
    std::vector<bool> frozen;
    int alternations = 0;
    bool converged = false;
    std::vector<HomotopyStage<Scalar>> stages;
};

/// Data-centroid affinities b_nk = G(|(x_n - c_k)/sigma|^2), raw (unshifted) values.
/// With the infinite-bandwidth sentinel the K-means surrogate b_nk = -|x_n - c_k|^2 is
/// used instead, so the trainer minimizes lambda tr(Z^T L Z) + sum_nk z_nk |x_n - c_k|^2.
template <typename Scalar>
Matrix<Scalar> compute_B(const Matrix<Scalar>& points, const CentroidSet<Scalar>& centroids) {
    if (points.cols() != centroids.d()) throw_usage("compute_B: data and centroid dimensions differ");
    const Scalar sigma = centroids.sigma;
    const bool kmeans_limit = is_infinite_bandwidth(sigma);
    if (!kmeans_limit && !(sigma > Scalar(0))) throw_usage("compute_B: bandwidth must be positive");
    Matrix<Scalar> b(points.rows(), centroids.k());
    const Scalar scale = kmeans_limit ? Scalar(0) : Scalar(1) / (sigma * sigma);
    parallel_for(0, points.rows(), [&](std::ptrdiff_t n) {
        for (Index k = 0; k < centroids.k(); ++k) {
            const Scalar d2 = (points.row(n) - centroids.centers.row(k)).squaredNorm();
            b(n, k) = kmeans_limit ? -d2 : kernel(d2 * scale);
        }
    });
    return b;
}

/// lambda tr(Z^T L Z) - tr(B^T Z).
template <typename Scalar>
Scalar objective(const AffinityGraph<Scalar>& graph, const Matrix<Scalar>& z, const Matrix<Scalar>& b, Scalar lambda) {
    if (z.rows() != b.rows() || z.cols() != b.cols()) throw_usage("objective: Z and B shapes differ");
    const Scalar smooth = lambda == Scalar(0) ? Scalar(0) : lambda * laplacian_quadratic(graph, z);
    return smooth - b.cwiseProduct(z).sum();
}

/// Hard labels: argmax per row, lowest index on ties.
template <typename Scalar>
Labels harden(const Matrix<Scalar>& z) {
    Labels labels(static_cast<std::size_t>(z.rows()));
    for (Index n = 0; n < z.rows(); ++n) labels[static_cast<std::size_t>(n)] = static_cast<int>(argmax_lowest(z.row(n)));
    return labels;
}

/// Exact Z-step when the Laplacian term vanishes: each row one-hot at argmax_k b_nk.
template <typename Scalar>
Matrix<Scalar> hard_assignment(const Matrix<Scalar>& b) {
    return one_hot<Scalar>(harden(b), b.cols());
}

/// State of the accelerated gradient projection: auxiliary point Y, the last two
/// feasible iterates, momentum t and the constant step s = 1 / (2 lambda M).
template <typename Scalar>
struct ZStepState {
    Matrix<Scalar> y;
    Matrix<Scalar> z;
    Matrix<Scalar> z_prev;
    Scalar t = 1;
    Scalar step = 0;
    int iteration = 0;

    ZStepState(const Matrix<Scalar>& z0, Scalar step_size) : y(z0), z(z0), z_prev(z0), step(step_size) {}
};

/// One iteration: gradient G = 2 lambda L Y - B, row-wise simplex projection of
/// Y - s G, momentum update and extrapolation.
template <typename Scalar>
void zstep_iterate(ZStepState<Scalar>& st, const AffinityGraph<Scalar>& graph, const Matrix<Scalar>& b,
                   Scalar lambda) {
    Matrix<Scalar> grad = Scalar(2) * lambda * apply_laplacian(graph, st.y);
    grad -= b;
    st.z_prev.swap(st.z);
    st.z = st.y - st.step * grad;
    project_rows_to_simplex(st.z);
    const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * st.t * st.t)) / Scalar(2);
    st.y = st.z + ((st.t - Scalar(1)) / t_next) * (st.z - st.z_prev);
    st.t = t_next;
    ++st.iteration;
}

template <typename Scalar>
struct ZStepReport {
    int iterations = 0;
    bool converged = false;
    Scalar initial_objective = 0;
    Scalar objective = 0;
};

template <typename Scalar>
using IterateCallback = std::function<void(const Matrix<Scalar>&)>;

/// Largest over rows of |z_n - z'_n| / |z'_n|.
template <typename Scalar>
Scalar max_relative_row_change(const Matrix<Scalar>& z, const Matrix<Scalar>& ref) {
    Scalar worst = 0;
    for (Index n = 0; n < z.rows(); ++n) {
        const Scalar denom = std::max(ref.row(n).norm(), std::numeric_limits<Scalar>::min());
        worst = std::max(worst, (z.row(n) - ref.row(n)).norm() / denom);
    }
    return worst;
}

/// Z-step: minimizes lambda tr(Z^T L Z) - tr(B^T Z) over row-stochastic Z by
/// accelerated gradient projection started at z_init. Every iterate is feasible. Since
/// the accelerated method is not monotone, the best iterate seen (z_init included) is
/// returned, so the result never has a higher objective than the warm start.
/// lambda = 0 or an edgeless graph reduce to the closed-form hard assignment.
template <typename Scalar>
Matrix<Scalar> zstep(const AffinityGraph<Scalar>& graph, const Matrix<Scalar>& b, Scalar lambda,
                     const Matrix<Scalar>& z_init, const std::type_identity_t<Tolerances<Scalar>>& tol = {},
                     std::type_identity_t<ZStepReport<Scalar>>* report = nullptr, const std::type_identity_t<IterateCallback<Scalar>>& on_iterate = {}) {
    if (z_init.rows() != b.rows() || z_init.cols() != b.cols() || graph.n() != b.rows()) {
        throw_usage("zstep: shapes of graph, B and Z_init disagree");
    }
    if (!(lambda >= Scalar(0))) throw_usage("zstep: lambda must be nonnegative");
    if (!is_row_stochastic(z_init, Scalar(1e-8))) throw_usage("zstep: Z_init is not row-stochastic");

    ZStepReport<Scalar> local;
    ZStepReport<Scalar>& rep = report ? *report : local;
    rep = {};
    rep.initial_objective = objective(graph, z_init, b, lambda);

    const Scalar m = graph.largest_eigenvalue();
    if (lambda == Scalar(0) || m == Scalar(0)) {
        Matrix<Scalar> z = hard_assignment(b);
        rep.converged = true;
        rep.objective = objective(graph, z, b, lambda);
        if (on_iterate) on_iterate(z);
        return z;
    }

    ZStepState<Scalar> st(z_init, Scalar(1) / (Scalar(2) * lambda * m));
    Matrix<Scalar> best = z_init;
    Scalar best_obj = rep.initial_objective;
    while (st.iteration < tol.max_zstep_iters) {
        zstep_iterate(st, graph, b, lambda);
        if (on_iterate) on_iterate(st.z);
        const Scalar f = objective(graph, st.z, b, lambda);
        if (f < best_obj) {
            best_obj = f;
            best = st.z;
        }
        if (max_relative_row_change(st.z, st.z_prev) < tol.zstep_tol) {
            // Consecutive iterates can coincide while the extrapolated point still moves
            // (e.g. both clipped to the same vertex), so confirm with a plain projected
            // gradient step from Z; if that moves, restart the momentum and go on.
            Matrix<Scalar> probe = st.z - st.step * (Scalar(2) * lambda * apply_laplacian(graph, st.z) - b);
            project_rows_to_simplex(probe);
            if (max_relative_row_change(probe, st.z) < tol.zstep_tol) {
                rep.converged = true;
                break;
            }
            st.y = st.z;
            st.t = Scalar(1);
        }
    }
    rep.iterations = st.iteration;
    rep.objective = best_obj;
    return best;
}

template <typename Scalar>
struct CStepReport {
    std::vector<bool> frozen;
    std::vector<bool> stalled;
    std::vector<int> iterations;
};

/// Receives (cluster, kde values along the mean-shift trajectory) for each C-step run.
template <typename Scalar>
using MeanShiftTraceCallback = std::function<void(Index, const std::vector<Scalar>&)>;

/// Clusters whose assignment mass is below this keep their centroid unchanged.
inline constexpr double kFrozenMass = 1e-12;

/// C-step: for each cluster k, maximizes sum_n z_nk G(|(x_n - c_k)/sigma|^2) by
/// weighted mean-shift started from the incoming centroid. With the infinite-bandwidth
/// sentinel the weighted mean is used instead.
template <typename Scalar>
CentroidSet<Scalar> cstep(const Matrix<Scalar>& points, const Matrix<Scalar>& z, const CentroidSet<Scalar>& in,
                          const std::type_identity_t<Tolerances<Scalar>>& tol = {}, std::type_identity_t<CStepReport<Scalar>>* report = nullptr,
                          const std::type_identity_t<MeanShiftTraceCallback<Scalar>>& on_trace = {}) {
    if (z.rows() != points.rows() || z.cols() != in.k() || points.cols() != in.d()) {
        throw_usage("cstep: shapes of data, Z and centroids disagree");
    }
    const Index kk = in.k();
    CentroidSet<Scalar> out = in;
    // Per-cluster flags as bytes: vector<bool> bits cannot be written concurrently.
    std::vector<char> frozen(static_cast<std::size_t>(kk), 0);
    std::vector<char> stalled(static_cast<std::size_t>(kk), 0);
    std::vector<int> iterations(static_cast<std::size_t>(kk), 0);
    std::vector<std::vector<Scalar>> traces(static_cast<std::size_t>(kk));
    const bool kmeans_limit = is_infinite_bandwidth(in.sigma);

    parallel_for(0, kk, [&](std::ptrdiff_t k) {
        const auto ks = static_cast<std::size_t>(k);
        const Vector<Scalar> w = z.col(k);
        const Scalar mass = w.sum();
        if (!(mass >= Scalar(kFrozenMass))) {
            frozen[ks] = 1;
            return;
        }
        if (kmeans_limit) {
            out.centers.row(k) = (w.transpose() * points) / mass;
            return;
        }
        const Kde<Scalar> kde(points, w, in.sigma);
        MeanShiftOptions<Scalar> opts;
        opts.tol = tol.cstep_rel_tol * in.sigma;
        opts.max_iter = tol.max_cstep_iters;
        if (on_trace) opts.density_trace = &traces[ks];
        const auto res = mean_shift_converge(kde, in.centers.row(k).transpose(), opts);
        out.centers.row(k) = res.mode.transpose();
        stalled[ks] = res.stalled ? 1 : 0;
        iterations[ks] = res.iterations;
    });

    if (on_trace) {
        for (Index k = 0; k < kk; ++k) {
            if (!traces[static_cast<std::size_t>(k)].empty()) on_trace(k, traces[static_cast<std::size_t>(k)]);
        }
    }
    if (report) {
        report->frozen.assign(frozen.begin(), frozen.end());
        report->stalled.assign(stalled.begin(), stalled.end());
        report->iterations = std::move(iterations);
    }
    return out;
}

/// Optional hooks into the alternation, used for diagnostics and tests.
template <typename Scalar>
struct FitMonitor {
    /// After each alternation: (index, Z, C, objective).
    std::function<void(int, const Matrix<Scalar>&, const CentroidSet<Scalar>&, Scalar)> on_alternation;
    MeanShiftTraceCallback<Scalar> on_mean_shift;
    IterateCallback<Scalar> on_zstep_iterate;
};

/// Alternates C-step and Z-step, each warm-started from the previous values, until the
/// relative objective change drops below tol.outer_tol or tol.max_outer alternations.
template <typename Scalar>
LapKModesModel<Scalar> fit(const Matrix<Scalar>& points, const AffinityGraph<Scalar>& graph,
                           const HyperParams<Scalar>& hyper, const std::type_identity_t<Tolerances<Scalar>>& tol,
                           const Matrix<Scalar>& z_init, const CentroidSet<Scalar>& c_init,
                           const FitMonitor<Scalar>* monitor = nullptr) {
    if (hyper.k < 1) throw_usage("fit: K must be at least 1");
    if (!(hyper.lambda >= Scalar(0))) throw_usage("fit: lambda must be nonnegative");
    if (!(hyper.sigma > Scalar(0))) throw_usage("fit: sigma must be positive");
    if (graph.n() != points.rows()) throw_usage("fit: graph size does not match data");
    if (z_init.rows() != points.rows() || z_init.cols() != hyper.k) throw_usage("fit: Z_init has the wrong shape");
    if (c_init.k() != hyper.k || c_init.d() != points.cols()) throw_usage("fit: C_init has the wrong shape");
    if (!is_row_stochastic(z_init, Scalar(1e-8))) throw_usage("fit: Z_init is not row-stochastic");

    LapKModesModel<Scalar> model;
    model.hyper = hyper;
    model.tol = tol;
    model.training_data = points;
    model.frozen.assign(static_cast<std::size_t>(hyper.k), false);

    Matrix<Scalar> z = z_init;
    CentroidSet<Scalar> c{c_init.centers, hyper.sigma};
    const MeanShiftTraceCallback<Scalar> no_trace;
    const IterateCallback<Scalar> no_iterate;
    for (int it = 0; it < tol.max_outer; ++it) {
        CStepReport<Scalar> crep;
        c = cstep(points, z, c, tol, &crep, monitor ? monitor->on_mean_shift : no_trace);
        for (std::size_t k = 0; k < crep.frozen.size(); ++k) model.frozen[k] = crep.frozen[k];

        const Matrix<Scalar> b = compute_B(points, c);
        z = zstep(graph, b, hyper.lambda, z, tol, nullptr, monitor ? monitor->on_zstep_iterate : no_iterate);
        const Scalar f = objective(graph, z, b, hyper.lambda);
        model.history.push_back(f);
        model.alternations = it + 1;
        if (monitor && monitor->on_alternation) monitor->on_alternation(it, z, c, f);

        if (model.history.size() >= 2) {
            const Scalar prev = model.history[model.history.size() - 2];
            const Scalar scale = std::max(std::abs(prev), std::numeric_limits<Scalar>::min());
            if (std::abs(f - prev) <= tol.outer_tol * scale) {
                model.converged = true;
                break;
            }
        }
    }
    model.centroids = std::move(c);
    model.assignments = std::move(z);
    model.objective = model.history.empty() ? Scalar(0) : model.history.back();
    return model;
}

/// Continuation path for (sigma, lambda). sigma follows a geometric sequence; lambda
/// is geometric too unless it starts at 0, in which case it grows linearly.
template <typename Scalar>
struct HomotopySchedule {
    Scalar sigma_start = 1;
    Scalar sigma_end = 1;
    int steps = 1;
    Scalar lambda_start = 1;
    Scalar lambda_end = 1;

    void validate() const {
        if (steps < 1) throw_usage("homotopy: steps must be at least 1");
        if (!(sigma_end > Scalar(0)) || !(sigma_start >= sigma_end) || !std::isfinite(sigma_start)) {
            throw_usage("homotopy: need finite sigma_start >= sigma_end > 0");
        }
        if (!(lambda_start >= Scalar(0)) || !(lambda_end >= Scalar(0))) throw_usage("homotopy: lambda must be nonnegative");
    }

    Scalar sigma_at(int i) const {
        if (steps == 1) return sigma_end;
        if (i == steps - 1) return sigma_end;
        return sigma_start * std::pow(sigma_end / sigma_start, Scalar(i) / Scalar(steps - 1));
    }

    Scalar lambda_at(int i) const {
        if (steps == 1 || i == steps - 1) return lambda_end;
        const Scalar frac = Scalar(i) / Scalar(steps - 1);
        if (lambda_start == Scalar(0)) return lambda_end * frac;
        return lambda_start * std::pow(lambda_end / lambda_start, frac);
    }
};

/// Runs fit at each stage of the schedule, warm-starting from the previous stage's Z and
/// C. The first stage starts from (z_init, c_init), normally a K-means solution. The
/// returned model carries the final stage's hyperparameters and one summary per stage;
/// its history concatenates all stages.
template <typename Scalar>
LapKModesModel<Scalar> fit_homotopy(const Matrix<Scalar>& points, const AffinityGraph<Scalar>& graph,
                                    const HyperParams<Scalar>& hyper_target, const HomotopySchedule<Scalar>& schedule,
                                    const std::type_identity_t<Tolerances<Scalar>>& tol, const Matrix<Scalar>& z_init,
                                    const CentroidSet<Scalar>& c_init, const FitMonitor<Scalar>* monitor = nullptr) {
    schedule.validate();
    Matrix<Scalar> z = z_init;
    CentroidSet<Scalar> c = c_init;
    std::vector<HomotopyStage<Scalar>> stages;
    std::vector<Scalar> history;
    LapKModesModel<Scalar> model;
    for (int i = 0; i < schedule.steps; ++i) {
        HyperParams<Scalar> stage = hyper_target;
        stage.sigma = schedule.sigma_at(i);
        stage.lambda = schedule.lambda_at(i);
        model = fit(points, graph, stage, tol, z, c, monitor);
        stages.push_back({stage.sigma, stage.lambda, model.objective, model.alternations});
        history.insert(history.end(), model.history.begin(), model.history.end());
        z = model.assignments;
        c = model.centroids;
    }
    model.stages = std::move(stages);
    model.history = std::move(history);
    return model;
}

template <typename Scalar>
struct InitialState {
    Matrix<Scalar> z;
    CentroidSet<Scalar> centroids;
};

/// K-means starting point: best-of-restarts k-means++/Lloyd centroids and the one-hot
/// nearest-centroid assignments (the lambda = 0 hard assignment).
template <typename Scalar>
InitialState<Scalar> kmeans_initial_state(const Matrix<Scalar>& points, Index k, int restarts, std::uint64_t seed) {
    auto km = kmeans_best_of(points, k, restarts, seed);
    return {one_hot<Scalar>(km.labels, k), {std::move(km.centers), infinite_bandwidth<Scalar>()}};
}

}  // namespace lapkm
