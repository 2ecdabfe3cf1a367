#pragma once

#include "gapdyn/series.hpp"

#include <optional>
#include <span>

namespace gapdyn {

struct KnnConfig {
    int k = 5;
    // Fallback when a cell has no comparable neighbor: station mean of
    // observed cells. The only fallback offered.
};

/// Missing-aware scaled Euclidean distance between two rows:
///   sqrt( (S / |C|) * sum_{i in C} (a_i - b_i)^2 )
/// over the co-observed index set C. Empty C yields an empty optional
/// (incomparable rows), which is a value, not an error.
std::optional<double> masked_distance(std::span<const double> a, std::span<const double> b,
                                      std::span<const bool> mask_a,
                                      std::span<const bool> mask_b);

/// Row-wise k-nearest-neighbor imputation over time points. For each masked
/// cell (t, s), candidate rows are all t' != t with station s observed and a
/// comparable distance to row t; the cell becomes the unweighted mean of the
/// k nearest candidates' station-s values, ties broken by smaller |t'-t|,
/// then smaller t'. Neighbors are drawn from observed cells only, never from
/// other imputed cells. Expects a Normalized-space matrix.
SeriesMatrix knn_impute(const SeriesMatrix& m, const KnnConfig& cfg);

} // namespace gapdyn
