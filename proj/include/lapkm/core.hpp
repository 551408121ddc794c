#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lapkm {

using Index = Eigen::Index;

/// Row-major dense matrix; rows are samples (or per-sample assignment vectors).
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Hard cluster ids, one per sample. -1 marks "no class" (e.g. generated outliers).
using Labels = std::vector<int>;

enum class ErrorKind { usage, data, numerical };

/// Library error. The kind maps onto CLI exit codes (usage 2, data 3, numerical 4).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& what) { throw Error(ErrorKind::usage, what); }
[[noreturn]] inline void throw_data(const std::string& what) { throw Error(ErrorKind::data, what); }
[[noreturn]] inline void throw_numerical(const std::string& what) { throw Error(ErrorKind::numerical, what); }

/// N x D dataset with optional ground-truth labels. Immutable once built.
template <typename Scalar>
struct DataMatrix {
    Matrix<Scalar> points;
    std::optional<Labels> labels;

    Index n() const { return points.rows(); }
    Index d() const { return points.cols(); }
};

using Dataset = DataMatrix<double>;

/// The infinite-bandwidth sentinel selects the K-means / Laplacian K-means limit.
template <typename Scalar>
constexpr Scalar infinite_bandwidth() {
    return std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
bool is_infinite_bandwidth(Scalar sigma) {
    return std::isinf(sigma) && sigma > 0;
}

/// K x D centroids plus the kde bandwidth they were fitted with.
template <typename Scalar>
struct CentroidSet {
    Matrix<Scalar> centers;
    Scalar sigma = infinite_bandwidth<Scalar>();

    Index k() const { return centers.rows(); }
    Index d() const { return centers.cols(); }
};

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

/// Every row nonnegative and summing to one within `tol`.
template <typename Derived>
bool is_row_stochastic(const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar tol) {
    using Scalar = typename Derived::Scalar;
    for (Index n = 0; n < z.rows(); ++n) {
        Scalar sum = 0;
        for (Index k = 0; k < z.cols(); ++k) {
            if (!(z(n, k) >= -tol)) return false;
            sum += z(n, k);
        }
        if (!(std::abs(sum - Scalar(1)) <= tol)) return false;
    }
    return true;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

}  // namespace lapkm
