#include "lapkm/graph.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lapkm;

namespace {

Matrix<double> line_points() {
    Matrix<double> x(3, 1);
    x << 0, 1, 2;
    return x;
}

AffinityGraph<double> two_node_path() { return AffinityGraph<double>::from_edges(2, {{0, 1, 1.0}}); }

Matrix<double> random_points(Index n, Index d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    Matrix<double> x(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) x(i, j) = u(rng);
    }
    return x;
}

}  // namespace

TEST_CASE("1-NN binary graph on a line") {
    GraphSpec spec;
    spec.k = 1;
    spec.weighting = Weighting::binary;
    const auto g = build_knn_graph(line_points(), spec);
    const auto e = g.edges();
    REQUIRE(e.size() == 2);
    CHECK(e[0].src == 0);
    CHECK(e[0].dst == 1);
    CHECK(e[1].src == 1);
    CHECK(e[1].dst == 2);
    CHECK(e[0].weight == 1.0);
    CHECK(e[1].weight == 1.0);
}

TEST_CASE("1-NN heat graph on a line") {
    GraphSpec spec;
    spec.k = 1;
    spec.heat_width = 1.0;
    const auto g = build_knn_graph(line_points(), spec);
    for (const auto& e : g.edges()) CHECK(e.weight == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("grid8 on a 2x2 image is complete") {
    Matrix<double> x = Matrix<double>::Zero(4, 3);
    GraphSpec spec;
    spec.grid8 = true;
    spec.grid_rows = 2;
    spec.grid_cols = 2;
    spec.heat_width = 0.5;
    const auto g = build_knn_graph(x, spec);
    CHECK(g.edge_count() == 6);
    for (Index i = 0; i < 4; ++i) CHECK(g.degrees()(i) == doctest::Approx(3.0));
}

TEST_CASE("grid8 interior pixel has eight neighbours") {
    Matrix<double> x = Matrix<double>::Zero(9, 3);
    GraphSpec spec;
    spec.grid8 = true;
    spec.grid_rows = 3;
    spec.grid_cols = 3;
    spec.weighting = Weighting::binary;
    const auto g = build_knn_graph(x, spec);
    CHECK(g.degrees()(4) == 8.0);
    CHECK(g.degrees()(0) == 3.0);
    CHECK(g.degrees()(1) == 5.0);
}

TEST_CASE("construction errors") {
    GraphSpec spec;
    spec.k = 3;
    spec.heat_width = 1.0;
    CHECK_THROWS_AS(build_knn_graph(line_points(), spec), Error);
    spec.k = 1;
    spec.heat_width = 0.0;
    CHECK_THROWS_AS(build_knn_graph(line_points(), spec), Error);
    spec.heat_width.reset();
    CHECK_THROWS_AS(build_knn_graph(line_points(), spec), Error);
}

TEST_CASE("union symmetrization keeps the larger weight") {
    const auto g = AffinityGraph<double>::from_edges(3, {{0, 1, 0.25}, {1, 0, 0.75}, {2, 2, 5.0}});
    CHECK(g.weights().coeff(0, 1) == 0.75);
    CHECK(g.weights().coeff(1, 0) == 0.75);
    CHECK(g.weights().coeff(2, 2) == 0.0);
    CHECK(g.edge_count() == 1);
}

TEST_CASE("laplacian_quadratic examples") {
    const auto g = two_node_path();
    Matrix<double> z(2, 2);
    z << 1, 0, 0, 1;
    CHECK(laplacian_quadratic(g, z) == doctest::Approx(2.0));
    z << 0.3, 0.7, 0.3, 0.7;
    CHECK(laplacian_quadratic(g, z) == 0.0);
    const auto empty = AffinityGraph<double>::from_edges(2, {});
    z << 1, 0, 0, 1;
    CHECK(laplacian_quadratic(empty, z) == 0.0);
    CHECK_THROWS_AS(laplacian_quadratic(g, Matrix<double>::Zero(3, 2)), Error);
}

TEST_CASE("apply_laplacian examples") {
    const auto g = two_node_path();
    Matrix<double> z(2, 1);
    z << 1, 0;
    const auto lz = apply_laplacian(g, z);
    CHECK(lz(0, 0) == 1.0);
    CHECK(lz(1, 0) == -1.0);
    z << 0.4, 0.4;
    CHECK(apply_laplacian(g, z).isZero());
    CHECK(apply_laplacian(AffinityGraph<double>::from_edges(2, {}), z).isZero());
    CHECK_THROWS_AS(apply_laplacian(g, Matrix<double>::Zero(3, 1)), Error);
}

TEST_CASE("largest eigenvalue examples") {
    CHECK(two_node_path().largest_eigenvalue() == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(AffinityGraph<double>::from_edges(3, {}).largest_eigenvalue() == 0.0);
    CHECK(AffinityGraph<double>().largest_eigenvalue() == 0.0);
}

TEST_CASE("random graphs against dense oracles") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const Index n = 6 + trial;
        const auto x = random_points(n, 3, rng);
        GraphSpec spec;
        spec.k = 1 + trial % 5;
        spec.weighting = trial % 2 ? Weighting::binary : Weighting::heat;
        spec.heat_width = 0.3;
        const auto g = build_knn_graph(x, spec);
        const Matrix<double> w = g.weights();
        CHECK(w.isApprox(w.transpose(), 0.0));
        CHECK(w.diagonal().isZero(0.0));
        CHECK((w.array() >= 0).all());
        CHECK((g.degrees() - w.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-10);

        const Eigen::MatrixXd wd = w;
        const auto z = oracle::random_stochastic(n, 3, rng);
        const Matrix<double> zr = z;
        const double dense = (z.transpose() * oracle::dense_laplacian(wd) * z).trace();
        CHECK(laplacian_quadratic(g, zr) == doctest::Approx(dense).epsilon(1e-12));
        CHECK(laplacian_quadratic(g, zr) >= 0.0);
        CHECK((apply_laplacian(g, zr) - oracle::dense_laplacian(wd) * z).cwiseAbs().maxCoeff() < 1e-10);

        const double m = oracle::largest_eigenvalue(wd);
        CHECK(std::abs(g.largest_eigenvalue() - m) <= 1e-6 * m);
        CHECK(g.largest_eigenvalue() <= 2 * g.max_degree() + 1e-8);
    }
}

TEST_CASE("k-NN search is deterministic across thread counts") {
    std::mt19937_64 rng(9);
    const auto x = random_points(200, 2, rng);
    GraphSpec spec;
    spec.heat_width = 0.1;
    set_num_threads(1);
    const auto a = build_knn_graph(x, spec);
    set_num_threads(4);
    const auto b = build_knn_graph(x, spec);
    set_num_threads(0);
    CHECK(Matrix<double>(a.weights()) == Matrix<double>(b.weights()));
    CHECK(a.largest_eigenvalue() == b.largest_eigenvalue());
}
