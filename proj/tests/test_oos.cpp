#include "lapkm/oos.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lapkm;

namespace {

/// 1-D model with centroids at 0 and 2 and two training points.
LapKModesModel<double> line_model(double lambda) {
    LapKModesModel<double> m;
    m.hyper.k = 2;
    m.hyper.lambda = lambda;
    m.hyper.sigma = 1.0;
    m.hyper.graph.k = 1;
    m.hyper.graph.heat_width = 1.0;
    m.centroids = {Matrix<double>(2, 1), 1.0};
    m.centroids.centers << 0, 2;
    m.training_data.resize(2, 1);
    m.training_data << 0.1, 1.9;
    m.assignments.resize(2, 2);
    m.assignments << 1, 0, 0, 1;
    return m;
}

LapKModesModel<double> trained(std::mt19937_64& rng, Index n, Index k, double lambda, Weighting weighting) {
    std::normal_distribution<double> g(0, 0.4);
    Matrix<double> x(n, 2);
    for (Index i = 0; i < n; ++i) x.row(i) << g(rng) + 2.0 * static_cast<double>(i % k), g(rng);
    HyperParams<double> hp;
    hp.k = k;
    hp.lambda = lambda;
    hp.sigma = 0.5;
    hp.graph.k = 4;
    hp.graph.weighting = weighting;
    hp.graph.heat_width = 0.5;
    const auto graph = build_knn_graph(x, hp.graph);
    const auto init = kmeans_initial_state(x, k, 2, 3);
    return fit(x, graph, hp, {}, init.z, init.centroids);
}

}  // namespace

TEST_CASE("oos decomposition examples") {
    const auto m = line_model(1.0);
    const auto dec = oos_decompose(m, Vector<double>::Constant(1, 0.0));
    const double e = std::exp(-2.0);
    CHECK(dec.q(0) == doctest::Approx(1 / (1 + e)).epsilon(1e-14));
    CHECK(dec.q(1) == doctest::Approx(e / (1 + e)).epsilon(1e-14));
    // Single neighbour with a one-hot assignment.
    CHECK(dec.z_bar == Vector<double>(m.assignments.row(0).transpose()));
    const double w = std::exp(-0.01 / 2);
    CHECK(dec.gamma == doctest::Approx((1 + e) / (2 * w)).epsilon(1e-14));

    const auto mid = oos_decompose(m, Vector<double>::Constant(1, 1.0));
    CHECK(mid.q(0) == doctest::Approx(0.5));
    CHECK(mid.q(1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(oos_decompose(m, Vector<double>::Zero(2)), Error);
}

TEST_CASE("oos predict special cases") {
    auto one = line_model(1.0);
    one.hyper.k = 1;
    one.centroids.centers.resize(1, 1);
    one.centroids.centers << 0;
    one.assignments = Matrix<double>::Ones(2, 1);
    CHECK(oos_predict(one, Vector<double>::Constant(1, 5.0)) == Vector<double>::Ones(1));

    auto sym = line_model(1.0);
    sym.assignments << 0.5, 0.5, 0.5, 0.5;
    const auto z = oos_predict(sym, Vector<double>::Constant(1, 1.0));
    CHECK(z(0) == doctest::Approx(0.5));
    CHECK(z(1) == doctest::Approx(0.5));

    const auto zero = oos_decompose(line_model(0.0), Vector<double>::Constant(1, 1.5));
    CHECK(zero.gamma_infinite());
    CHECK(oos_predict(line_model(0.0), Vector<double>::Constant(1, 1.5)) == Vector<double>((Vector<double>(2) << 0, 1).finished()));
}

TEST_CASE("small lambda drives the prediction to the nearest-centroid vertex") {
    const Vector<double> x = Vector<double>::Constant(1, 1.6);
    double prev = 0;
    for (double lambda : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
        const auto z = oos_predict(line_model(lambda), x);
        CHECK(z(1) >= prev - 1e-15);
        prev = z(1);
    }
    CHECK(prev == 1.0);
}

TEST_CASE("isolated test point falls back to q") {
    auto m = line_model(1.0);
    m.hyper.graph.heat_width = 1e-3;
    const auto dec = oos_decompose(m, Vector<double>::Constant(1, 50.0));
    CHECK(dec.gamma_infinite());
    CHECK(dec.z_bar(0) == 0.5);
    const auto z = oos_predict(m, Vector<double>::Constant(1, 50.0));
    CHECK(z(1) == 1.0);
}

TEST_CASE("oos predictions are simplex-valid and continuous on heat models") {
    std::mt19937_64 rng(2);
    const auto m = trained(rng, 60, 3, 1.0, Weighting::heat);
    std::uniform_real_distribution<double> u(-1, 5);
    for (int i = 0; i < 200; ++i) {
        const Vector<double> x = (Vector<double>(2) << u(rng), u(rng) * 0.3).finished();
        const auto z = oos_predict(m, x);
        CHECK(is_row_stochastic(Matrix<double>(z.transpose()), 1e-10));
        const auto dz = oos_predict(m, Vector<double>(x + Vector<double>::Constant(2, 1e-6)));
        CHECK((dz - z).cwiseAbs().maxCoeff() < 0.1);
    }
    const auto batch = oos_predict_batch(m, m.training_data);
    CHECK(batch.rows() == 60);
    CHECK(is_row_stochastic(batch, 1e-10));
}

TEST_CASE("row update matches a direct per-row QP") {
    // Two points joined by w = 0.8; row 0 is re-solved with row 1 fixed.
    const auto g = AffinityGraph<double>::from_edges(2, {{0, 1, 0.8}});
    Matrix<double> b(2, 3);
    b << 0.9, 0.2, 0.4, 0.1, 0.7, 0.3;
    Matrix<double> z(2, 3);
    z << 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.2, 0.5, 0.3;
    const double lambda = 0.6;
    const auto row = oos_row_solution(g, b, lambda, z, 0);
    // Row objective: lambda * 2 * w |z0 - z1|^2 - b0.z0, i.e. a scaled distance to
    // z1 + b0 / (2 lambda w); minimize over the simplex by enumeration.
    const Eigen::VectorXd target = z.row(1).transpose() + b.row(0).transpose() / (2 * lambda * 0.8);
    CHECK((row - oracle::simplex_projection_enumerate(target)).cwiseAbs().maxCoeff() < 1e-14);
    Matrix<double> after = z;
    after.row(0) = row.transpose();
    CHECK(objective(g, after, b, lambda) <= objective(g, z, b, lambda));
}

TEST_CASE("sweep solver agrees with the accelerated Z-step") {
    std::mt19937_64 rng(44);
    std::uniform_int_distribution<int> nd(4, 30), kd(2, 4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = nd(rng);
        const Index k = kd(rng);
        std::vector<Edge<double>> edges;
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                if (u(rng) < 0.25) edges.push_back({i, j, u(rng)});
            }
        }
        const auto g = AffinityGraph<double>::from_edges(n, edges);
        Matrix<double> b(n, k);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < k; ++j) b(i, j) = u(rng);
        }
        const double lambda = trial % 2 ? 1.0 : 0.3;
        const Matrix<double> z0 = oracle::random_stochastic(n, k, rng);
        Tolerances<double> tol;
        tol.zstep_tol = 1e-12;
        tol.max_zstep_iters = 200000;
        ZStepReport<double> zr;
        zstep(g, b, lambda, z0, tol, &zr);

        // Every single row update is non-increasing.
        Matrix<double> z = z0;
        double f = objective(g, z, b, lambda);
        for (Index i = 0; i < n; ++i) {
            z.row(i) = oos_row_solution(g, b, lambda, z, i).transpose();
            const double next = objective(g, z, b, lambda);
            CHECK(next <= f + 1e-12);
            f = next;
        }
        SweepReport<double> sr;
        SweepOptions<double> so;
        so.tol = 1e-14;
        oos_sweep(g, b, lambda, z0, so, &sr);
        CHECK(std::abs(sr.objective - zr.objective) < 1e-5);
    }
}

TEST_CASE("sweeping a trained model") {
    std::mt19937_64 rng(8);
    auto m = trained(rng, 45, 3, 2.0, Weighting::heat);
    const auto graph = build_knn_graph(m.training_data, m.hyper.graph);
    const auto b = compute_B(m.training_data, m.centroids);
    Tolerances<double> tol;
    tol.zstep_tol = 1e-13;
    tol.max_zstep_iters = 100000;
    m.assignments = zstep(graph, b, m.hyper.lambda, m.assignments, tol);
    const double before = objective(graph, m.assignments, b, m.hyper.lambda);
    SweepReport<double> rep;
    SweepOptions<double> once;
    once.max_sweeps = 1;
    zstep_by_oos_sweep(m, once, &rep);
    CHECK(std::abs(rep.objective - before) < 1e-9);

    const auto binary = trained(rng, 45, 3, 2.0, Weighting::binary);
    const auto z = zstep_by_oos_sweep(binary);
    CHECK(is_row_stochastic(z, 1e-10));
}
