#include "lapkm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace lapkm {

std::vector<int> min_cost_assignment(const Matrix<double>& cost) {
    const Index rows = cost.rows();
    const Index cols = cost.cols();
    const Index n = std::max(rows, cols);
    if (n == 0) return {};
    // Pad to square with zero-cost dummies; 1-based arrays as in the classic formulation.
    auto at = [&](Index i, Index j) { return (i < rows && j < cols) ? cost(i, j) : 0.0; };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (Index i = 1; i <= n; ++i) {
        match[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Index i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) continue;
                const double cur = at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
                if (cur < minv[js]) {
                    minv[js] = cur;
                    way[js] = j0;
                }
                if (minv[js] < delta) {
                    delta = minv[js];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) {
                    u[static_cast<std::size_t>(match[js])] += delta;
                    v[js] -= delta;
                } else {
                    minv[js] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(rows), -1);
    for (Index j = 1; j <= n; ++j) {
        const Index i = match[static_cast<std::size_t>(j)];
        if (i >= 1 && i <= rows && j <= cols) row_to_col[static_cast<std::size_t>(i - 1)] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

namespace {

/// Dense relabeling to 0..C-1 in order of first appearance.
std::vector<int> compact(const Labels& labels, int& count) {
    std::map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    count = static_cast<int>(ids.size());
    return out;
}

Matrix<double> contingency(const Labels& pred, const Labels& truth, std::vector<int>& p, std::vector<int>& t) {
    if (pred.size() != truth.size()) throw_usage("label vectors differ in length");
    if (pred.empty()) throw_usage("label vectors are empty");
    int np = 0;
    int nt = 0;
    p = compact(pred, np);
    t = compact(truth, nt);
    Matrix<double> table = Matrix<double>::Zero(np, nt);
    for (std::size_t i = 0; i < p.size(); ++i) table(p[i], t[i]) += 1.0;
    return table;
}

double entropy(const Vector<double>& counts, double total) {
    double h = 0;
    for (Index i = 0; i < counts.size(); ++i) {
        if (counts(i) > 0) {
            const double pr = counts(i) / total;
            h -= pr * std::log(pr);
        }
    }
    return h;
}

}  // namespace

double accuracy(const Labels& pred, const Labels& truth) {
    std::vector<int> p, t;
    const Matrix<double> table = contingency(pred, truth, p, t);
    const auto match = min_cost_assignment(-table);
    double hits = 0;
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] >= 0) hits += table(static_cast<Index>(i), match[i]);
    }
    return hits / static_cast<double>(pred.size());
}

double nmi(const Labels& pred, const Labels& truth, NmiNorm norm) {
    std::vector<int> p, t;
    const Matrix<double> table = contingency(pred, truth, p, t);
    const double total = static_cast<double>(pred.size());
    const Vector<double> rows = table.rowwise().sum();
    const Vector<double> cols = table.colwise().sum().transpose();
    const double hp = entropy(rows, total);
    const double ht = entropy(cols, total);
    if (hp == 0.0 || ht == 0.0) {
        // Same partition iff the relabeled sequences coincide.
        return p == t ? 1.0 : 0.0;
    }
    double mi = 0;
    for (Index i = 0; i < table.rows(); ++i) {
        for (Index j = 0; j < table.cols(); ++j) {
            const double nij = table(i, j);
            if (nij > 0) mi += (nij / total) * std::log(nij * total / (rows(i) * cols(j)));
        }
    }
    double denom = std::sqrt(hp * ht);
    if (norm == NmiNorm::max) denom = std::max(hp, ht);
    if (norm == NmiNorm::avg) denom = 0.5 * (hp + ht);
    return std::clamp(mi / denom, 0.0, 1.0);
}

double occluder_error(const Labels& labels, const std::vector<bool>& mask) {
    if (labels.size() != mask.size()) throw_usage("occluder_error: labels and mask differ in length");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) throw_usage("occluder_error: mask has no positive pixel");
    std::map<int, std::size_t> overlap;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (mask[i]) ++overlap[labels[i]];
    }
    int positive = overlap.begin()->first;
    std::size_t best = 0;
    for (const auto& [label, count] : overlap) {
        if (count > best) {
            best = count;
            positive = label;
        }
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if ((labels[i] == positive) != mask[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

}  // namespace lapkm
