#pragma once

#include "lapkm/core.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace lapkm {

/// Euclidean projection of `v` onto the probability simplex {z >= 0, sum z = 1}.
///
/// Sort-and-threshold, O(K log K): with u the entries sorted descending, take the
/// largest rho such that u_rho - (sum_{i<=rho} u_i - 1) / rho > 0, and shift every
/// entry down by that threshold, clipping at zero. Ties in the sort are irrelevant
/// because the projection is unique.
///
/// Inputs that already lie on the simplex (up to a few ulps in the sum) are returned
/// bit-for-bit, which makes the projection exactly idempotent.
template <typename Derived>
Vector<typename Derived::Scalar> project_simplex(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const Index k = v.size();
    if (k == 0) throw_usage("project_simplex: empty vector");
    if (!all_finite(v)) throw_usage("project_simplex: non-finite entry");
    if (k == 1) return Vector<Scalar>::Ones(1);

    const Scalar sum = v.sum();
    const Scalar feasible_slack = Scalar(16) * Scalar(k) * std::numeric_limits<Scalar>::epsilon();
    if ((v.array() >= Scalar(0)).all() && std::abs(sum - Scalar(1)) <= feasible_slack) {
        return v;
    }

    std::vector<Scalar> sorted(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) sorted[static_cast<std::size_t>(i)] = v(i);
    std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());

    Scalar running = 0;
    Scalar theta = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        running += sorted[i];
        const Scalar candidate = (running - Scalar(1)) / Scalar(i + 1);
        if (sorted[i] - candidate > Scalar(0)) theta = candidate;
    }
    return (v.array() - theta).max(Scalar(0)).matrix();
}

/// Projects every row of `z` onto the simplex in place.
template <typename Scalar>
void project_rows_to_simplex(Matrix<Scalar>& z) {
    for (Index n = 0; n < z.rows(); ++n) {
        z.row(n) = project_simplex(z.row(n).transpose()).transpose();
    }
}

}  // namespace lapkm
