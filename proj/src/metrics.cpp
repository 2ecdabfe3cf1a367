#include "gapdyn/metrics.hpp"

#include "gapdyn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gapdyn {

double ioa(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.empty() || observed.size() != predicted.size()) {
        throw InvalidConfig("ioa requires two non-empty vectors of equal length");
    }
    double mean = 0.0;
    for (double o : observed) mean += o;
    mean /= static_cast<double>(observed.size());

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        num += e * e;
        const double spread = std::abs(predicted[i] - mean) + std::abs(observed[i] - mean);
        den += spread * spread;
    }
    if (den == 0.0) {
        throw DegenerateObserved("index of agreement undefined: zero denominator");
    }
    // num <= den holds exactly (triangle inequality through the mean) but can
    // break by an ulp in floating point; keep the documented range true.
    return std::clamp(1.0 - num / den, 0.0, 1.0);
}

double rmse(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.empty() || observed.size() != predicted.size()) {
        throw InvalidConfig("rmse requires two non-empty vectors of equal length");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(observed.size()));
}

CellScores score_at_cells(const SeriesMatrix& truth, const SeriesMatrix& estimate,
                          const std::vector<Cell>& cells) {
    if (truth.space() != Space::Raw || estimate.space() != Space::Raw) {
        throw SpaceMismatch("scoring happens in Raw space");
    }
    if (truth.rows() != estimate.rows() || truth.stations() != estimate.stations()) {
        throw ShapeMismatch("truth and estimate shapes differ");
    }
    if (cells.empty()) throw InvalidConfig("no cells to score");

    const Eigen::Index n_stations = truth.stations();
    std::vector<std::vector<double>> obs(n_stations), pred(n_stations);
    for (const Cell& c : cells) {
        if (c.row < 0 || c.row >= truth.rows() || c.station < 0 || c.station >= n_stations) {
            throw InvalidConfig("scored cell out of range");
        }
        if (!truth.is_observed(c.row, c.station)) {
            throw TruthMissing("truth is masked at row " + std::to_string(c.row) +
                               ", station " + std::to_string(c.station));
        }
        if (!estimate.is_observed(c.row, c.station)) {
            throw InvalidConfig("estimate is masked at a scored cell");
        }
        obs[c.station].push_back(truth.values()(c.row, c.station));
        pred[c.station].push_back(estimate.values()(c.row, c.station));
    }

    CellScores out;
    std::vector<double> pooled_obs, pooled_pred;
    for (Eigen::Index s = 0; s < n_stations; ++s) {
        StationScore score;
        score.station_id = truth.station_ids()[s];
        score.n_cells = static_cast<Eigen::Index>(obs[s].size());
        const bool degenerate =
            obs[s].size() < 2 || *std::min_element(obs[s].begin(), obs[s].end()) ==
                                     *std::max_element(obs[s].begin(), obs[s].end());
        if (!obs[s].empty()) score.rmse = rmse(obs[s], pred[s]);
        if (!degenerate) {
            score.ioa = ioa(obs[s], pred[s]);
            pooled_obs.insert(pooled_obs.end(), obs[s].begin(), obs[s].end());
            pooled_pred.insert(pooled_pred.end(), pred[s].begin(), pred[s].end());
        }
        out.stations.push_back(std::move(score));
    }
    if (pooled_obs.empty()) {
        throw DegenerateObserved("every station is unscorable at the requested cells");
    }
    out.pooled_ioa = ioa(pooled_obs, pooled_pred);
    out.pooled_rmse = rmse(pooled_obs, pooled_pred);
    out.pooled_cells = static_cast<Eigen::Index>(pooled_obs.size());
    return out;
}

} // namespace gapdyn
