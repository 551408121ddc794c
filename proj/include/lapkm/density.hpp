#pragma once

#include "lapkm/core.hpp"
#include "lapkm/parallel.hpp"

#include <numeric>
#include <vector>

namespace lapkm {

/// Unnormalized Gaussian kernel G(t) = exp(-t/2) on squared scaled distances t.
template <typename Scalar>
Scalar kernel(Scalar t) {
    if (!(t >= Scalar(0))) throw_usage("kernel: argument must be nonnegative");
    return std::exp(-t / Scalar(2));
}

/// Normalizing constant 1 / (N (2 pi sigma^2)^{D/2}) that turns the uniform-weight
/// unnormalized kde into a probability density. Reporting only.
template <typename Scalar>
Scalar kde_normalizer(Index n, Index d, Scalar sigma) {
    const Scalar two_pi = Scalar(2) * Scalar(EIGEN_PI);
    return Scalar(1) / (Scalar(n) * std::pow(two_pi * sigma * sigma, Scalar(d) / Scalar(2)));
}

/// Kernel density estimate sum_n w_n G(|(x - x_n)/sigma|^2) over the rows of a support
/// matrix. Without explicit weights every point carries 1/N. The support is borrowed and
/// must outlive the Kde.
template <typename Scalar>
class Kde {
public:
    Kde(const Matrix<Scalar>& support, Scalar sigma) : Kde(support, Vector<Scalar>(), sigma) {}

    Kde(const Matrix<Scalar>& support, Vector<Scalar> weights, Scalar sigma)
        : support_(&support), weights_(std::move(weights)), sigma_(sigma) {
        if (!(sigma > Scalar(0)) || !std::isfinite(sigma)) throw_usage("Kde: bandwidth must be finite and positive");
        if (support.rows() == 0) throw_usage("Kde: empty support");
        if (weights_.size() == 0) {
            weights_ = Vector<Scalar>::Constant(support.rows(), Scalar(1) / Scalar(support.rows()));
        }
        if (weights_.size() != support.rows()) throw_usage("Kde: weight count does not match support");
        if (!((weights_.array() >= Scalar(0)).all())) throw_usage("Kde: weights must be nonnegative");
        for (Index n = 0; n < weights_.size(); ++n) {
            if (weights_(n) > Scalar(0)) active_.push_back(n);
        }
    }

    const Matrix<Scalar>& support() const { return *support_; }
    const Vector<Scalar>& weights() const { return weights_; }
    Scalar sigma() const { return sigma_; }
    Index dim() const { return support_->cols(); }
    /// Support rows with nonzero weight.
    const std::vector<Index>& active() const { return active_; }

private:
    const Matrix<Scalar>* support_;
    Vector<Scalar> weights_;
    Scalar sigma_;
    std::vector<Index> active_;
};

namespace detail {

/// One weighted mean-shift evaluation at x: the kde value at x and the next iterate.
/// Exponents are shifted by their maximum before exponentiation; `stalled` is set when
/// no support point carries weight.
template <typename Scalar>
struct ShiftEval {
    Vector<Scalar> next;
    Scalar density = 0;
    bool stalled = false;
};

template <typename Scalar, typename Derived>
ShiftEval<Scalar> shift_eval(const Kde<Scalar>& kde, const Eigen::MatrixBase<Derived>& x) {
    const auto& pts = kde.support();
    const auto& active = kde.active();
    const Scalar scale = Scalar(-1) / (Scalar(2) * kde.sigma() * kde.sigma());
    std::vector<Scalar> expo(active.size());
    Scalar top = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
        expo[i] = scale * (pts.row(active[i]).transpose() - x).squaredNorm();
        top = std::max(top, expo[i]);
    }
    ShiftEval<Scalar> out;
    out.next = x;
    if (active.empty()) {
        out.stalled = true;
        return out;
    }
    Vector<Scalar> acc = Vector<Scalar>::Zero(kde.dim());
    Scalar total = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const Scalar r = kde.weights()(active[i]) * std::exp(expo[i] - top);
        total += r;
        acc.noalias() += r * pts.row(active[i]).transpose();
    }
    if (!(total > Scalar(0))) {
        out.stalled = true;
        return out;
    }
    out.next = acc / total;
    out.density = std::exp(top) * total;
    return out;
}

}  // namespace detail

template <typename Scalar, typename Derived>
Scalar kde_eval(const Kde<Scalar>& kde, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != kde.dim()) throw_usage("kde_eval: point dimension does not match support");
    return detail::shift_eval(kde, x.derived().template cast<Scalar>()).density;
}

template <typename Scalar>
struct MeanShiftOptions {
    /// Stop when an update moves the iterate less than this; <= 0 selects 1e-5 * sigma.
    Scalar tol = 0;
    int max_iter = 500;
    /// When set, receives the kde value at every iterate (start point included).
    std::vector<Scalar>* density_trace = nullptr;
};

template <typename Scalar>
struct MeanShiftResult {
    Vector<Scalar> mode;
    int iterations = 0;
    Scalar density = 0;
    bool stalled = false;
};

/// Fixed-point iteration x <- sum_n p(n|x) x_n with p(n|x) proportional to
/// w_n G(|(x - x_n)/sigma|^2). Each update does not decrease the kde.
template <typename Scalar, typename Derived>
MeanShiftResult<Scalar> mean_shift_converge(const Kde<Scalar>& kde, const Eigen::MatrixBase<Derived>& x0,
                                            const MeanShiftOptions<Scalar>& opts = {}) {
    if (x0.size() != kde.dim()) throw_usage("mean_shift: start point dimension does not match support");
    const Scalar tol = opts.tol > Scalar(0) ? opts.tol : Scalar(1e-5) * kde.sigma();
    MeanShiftResult<Scalar> res;
    res.mode = x0;
    for (int it = 0; it < opts.max_iter; ++it) {
        auto ev = detail::shift_eval(kde, res.mode);
        if (ev.stalled) {
            res.stalled = true;
            return res;
        }
        if (opts.density_trace) opts.density_trace->push_back(ev.density);
        const Scalar moved = (ev.next - res.mode).norm();
        res.mode = std::move(ev.next);
        res.iterations = it + 1;
        if (moved < tol) break;
    }
    const auto last = detail::shift_eval(kde, res.mode);
    res.density = last.density;
    if (opts.density_trace) opts.density_trace->push_back(last.density);
    return res;
}

template <typename Scalar>
struct GmsResult {
    CentroidSet<Scalar> modes;
    Labels labels;
};

/// Gaussian mean-shift clustering: every point climbs to a mode of the uniform kde;
/// converged points within `merge_tol` (default 1e-2 sigma) are joined by single linkage.
/// Cluster ids follow the lowest member index, and each mode is the converged position
/// of that member, so the result does not depend on evaluation order.
template <typename Scalar>
GmsResult<Scalar> gms_cluster(const Matrix<Scalar>& points, Scalar sigma, Scalar merge_tol = 0,
                              MeanShiftOptions<Scalar> opts = {}) {
    const Index n = points.rows();
    if (n == 0) throw_usage("gms_cluster: empty dataset");
    const Kde<Scalar> kde(points, sigma);
    if (merge_tol <= Scalar(0)) merge_tol = Scalar(1e-2) * sigma;
    opts.density_trace = nullptr;

    Matrix<Scalar> converged(n, points.cols());
    parallel_for(0, n, [&](std::ptrdiff_t i) {
        converged.row(i) = mean_shift_converge(kde, points.row(i).transpose(), opts).mode.transpose();
    });

    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    const Scalar merge2 = merge_tol * merge_tol;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if ((converged.row(i) - converged.row(j)).squaredNorm() <= merge2) {
                const Index a = find(i);
                const Index b = find(j);
                if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
            }
        }
    }

    GmsResult<Scalar> out;
    out.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<Index> root_label(static_cast<std::size_t>(n), -1);
    std::vector<Index> representatives;
    for (Index i = 0; i < n; ++i) {
        const Index r = find(i);
        auto& lab = root_label[static_cast<std::size_t>(r)];
        if (lab < 0) {
            lab = static_cast<Index>(representatives.size());
            representatives.push_back(i);
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(lab);
    }
    out.modes.sigma = sigma;
    out.modes.centers.resize(static_cast<Index>(representatives.size()), points.cols());
    for (std::size_t c = 0; c < representatives.size(); ++c) {
        out.modes.centers.row(static_cast<Index>(c)) = converged.row(representatives[c]);
    }
    return out;
}

/// Bisection on log sigma (30 steps at most) for a bandwidth giving exactly `k` GMS modes.
/// Requires modes(sigma_lo) >= k >= modes(sigma_hi); returns the largest tested sigma
/// that gives exactly k modes.
template <typename Scalar>
Scalar gms_find_sigma_for_k(const Matrix<Scalar>& points, Index k, Scalar sigma_lo, Scalar sigma_hi,
                            const MeanShiftOptions<Scalar>& opts = {}) {
    if (!(sigma_lo > Scalar(0)) || !(sigma_hi >= sigma_lo)) {
        throw_usage("gms_find_sigma_for_k: need 0 < sigma_lo <= sigma_hi");
    }
    auto count = [&](Scalar s) { return gms_cluster(points, s, Scalar(0), opts).modes.k(); };
    const Index hi_count = count(sigma_hi);
    if (hi_count == k) return sigma_hi;
    const Index lo_count = count(sigma_lo);
    if (lo_count < k || hi_count > k) {
        throw_usage("gms_find_sigma_for_k: bracket [" + std::to_string(sigma_lo) + ", " + std::to_string(sigma_hi) +
                    "] gives " + std::to_string(lo_count) + " to " + std::to_string(hi_count) +
                    " modes, which does not enclose " + std::to_string(k));
    }
    std::optional<Scalar> best;
    if (lo_count == k) best = sigma_lo;
    Scalar lo = std::log(sigma_lo);
    Scalar hi = std::log(sigma_hi);
    for (int it = 0; it < 30; ++it) {
        const Scalar mid = (lo + hi) / Scalar(2);
        const Index c = count(std::exp(mid));
        if (c == k) best = best ? std::max(*best, std::exp(mid)) : std::exp(mid);
        if (c >= k) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (!best) throw_numerical("gms_find_sigma_for_k: no bandwidth in the bracket gives exactly " + std::to_string(k) + " modes");
    return *best;
}

}  // namespace lapkm
