#pragma once

#include "lapkm/core.hpp"

#include <vector>

namespace lapkm {

/// Minimum-cost assignment on a rectangular cost matrix (rows x cols), Hungarian method
/// with potentials, O(n^3) for n = max(rows, cols). Returns the matched column of each
/// row, or -1 for rows left unmatched when rows > cols.
std::vector<int> min_cost_assignment(const Matrix<double>& cost);

/// Clustering accuracy: fraction of points matched under the best one-to-one pairing of
/// predicted clusters with true classes. Cluster and class counts may differ.
double accuracy(const Labels& pred, const Labels& truth);

enum class NmiNorm { sqrt, max, avg };

/// I(pred; truth) normalized by sqrt(H_pred H_truth) (or max / arithmetic mean), natural
/// logs over the empirical contingency table. If either entropy is zero the result is 1
/// when both labelings describe the same partition and 0 otherwise.
double nmi(const Labels& pred, const Labels& truth, NmiNorm norm = NmiNorm::sqrt);

/// Figure-ground error: the cluster overlapping the mask most is the positive prediction;
/// returns (false positives + false negatives) / N.
double occluder_error(const Labels& labels, const std::vector<bool>& mask);

}  // namespace lapkm
