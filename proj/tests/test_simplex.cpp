#include "lapkm/simplex.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lapkm;

namespace {

Vector<double> vec(std::initializer_list<double> v) {
    Vector<double> out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("already on the simplex is returned unchanged") {
    const auto v = vec({0.2, 0.3, 0.5});
    CHECK(project_simplex(v) == v);
}

TEST_CASE("far outside projects onto a vertex") {
    CHECK(project_simplex(vec({10, 0})) == vec({1, 0}));
}

TEST_CASE("interior threshold case") {
    const auto z = project_simplex(vec({0.5, 0.4, 0.3}));
    CHECK(z(0) == doctest::Approx(0.5 - 0.2 / 3).epsilon(1e-14));
    CHECK(z(1) == doctest::Approx(0.4 - 0.2 / 3).epsilon(1e-14));
    CHECK(z(2) == doctest::Approx(0.3 - 0.2 / 3).epsilon(1e-14));
    CHECK((z - oracle::simplex_projection_enumerate(vec({0.5, 0.4, 0.3}))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("K = 1 is always (1)") {
    CHECK(project_simplex(vec({-7.5}))(0) == 1.0);
    CHECK(project_simplex(vec({1e9}))(0) == 1.0);
}

TEST_CASE("empty and non-finite inputs are rejected") {
    CHECK_THROWS_AS(project_simplex(Vector<double>()), Error);
    CHECK_THROWS_AS(project_simplex(vec({1, std::numeric_limits<double>::quiet_NaN()})), Error);
    CHECK_THROWS_AS(project_simplex(vec({std::numeric_limits<double>::infinity(), 0})), Error);
}

TEST_CASE("feasibility, idempotence and translation invariance on random inputs") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0, 3);
    std::uniform_int_distribution<int> kd(1, 64);
    for (int trial = 0; trial < 2000; ++trial) {
        const Index k = kd(rng);
        Vector<double> v(k);
        for (Index i = 0; i < k; ++i) v(i) = g(rng);
        const auto z = project_simplex(v);
        CHECK((z.array() >= 0).all());
        CHECK(std::abs(z.sum() - 1) < 1e-10);
        CHECK(project_simplex(z) == z);
        const double c = g(rng);
        CHECK((project_simplex((v.array() + c).matrix()) - z).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("agrees with support enumeration for small K") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 2000; ++trial) {
        const Index k = 1 + trial % 5;
        Vector<double> v(k);
        for (Index i = 0; i < k; ++i) v(i) = g(rng);
        CHECK((project_simplex(v) - oracle::simplex_projection_enumerate(v)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("row-wise projection") {
    Matrix<double> z(2, 3);
    z << 3, 0, 0, 0.5, 0.4, 0.3;
    project_rows_to_simplex(z);
    CHECK(is_row_stochastic(z, 1e-12));
    CHECK(z(0, 0) == 1.0);
}
