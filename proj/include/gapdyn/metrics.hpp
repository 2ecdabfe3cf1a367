#pragma once

#include "gapdyn/series.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gapdyn {

/// Willmott's index of agreement:
///   d = 1 - sum((O-P)^2) / sum((|P-mean(O)| + |O-mean(O)|)^2)
/// Always in [0, 1] (clamped against sub-ulp rounding at the boundary).
/// Throws DegenerateObserved when the denominator is zero.
double ioa(std::span<const double> observed, std::span<const double> predicted);

double rmse(std::span<const double> observed, std::span<const double> predicted);

struct StationScore {
    std::string station_id;
    Eigen::Index n_cells = 0;
    std::optional<double> ioa;  // empty = unscorable (< 2 cells or degenerate truth)
    std::optional<double> rmse;
};

struct CellScores {
    double pooled_ioa = 0.0;
    double pooled_rmse = 0.0;
    Eigen::Index pooled_cells = 0;
    std::vector<StationScore> stations;
};

/// Scores `estimate` against `truth` at the given cells, in Raw space.
/// Pooled values are computed over the union of the scorable stations'
/// cells (never as a mean of per-station scores). Throws TruthMissing if a
/// requested cell is masked in `truth`.
CellScores score_at_cells(const SeriesMatrix& truth, const SeriesMatrix& estimate,
                          const std::vector<Cell>& cells);

} // namespace gapdyn
