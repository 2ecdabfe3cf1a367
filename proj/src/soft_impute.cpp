#include "gapdyn/soft_impute.hpp"

#include "gapdyn/errors.hpp"
#include "gapdyn/metrics.hpp"
#include "gapdyn/missingness.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gapdyn {

namespace {

void check_config(const SoftImputeConfig& cfg) {
    if (!(cfg.lambda >= 0.0)) throw InvalidConfig("lambda must be >= 0");
    if (!(cfg.tol > 0.0 && cfg.tol < 1.0)) throw InvalidConfig("tol must lie in (0, 1)");
    if (cfg.max_iter < 1) throw InvalidConfig("max_iter must be >= 1");
}

Eigen::VectorXd station_means(const SeriesMatrix& m) {
    Eigen::VectorXd means(m.stations());
    for (Eigen::Index s = 0; s < m.stations(); ++s) {
        double sum = 0.0;
        Eigen::Index n = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (!m.is_observed(r, s)) continue;
            sum += m.values()(r, s);
            ++n;
        }
        if (n == 0) throw NoObservedData("station '" + m.station_ids()[s] +
                                         "' has no observed cells");
        means(s) = sum / static_cast<double>(n);
    }
    return means;
}

} // namespace

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& singular_values, double lambda) {
    if (!(lambda >= 0.0)) throw InvalidConfig("lambda must be >= 0");
    return (singular_values.array() - lambda).max(0.0);
}

Eigen::MatrixXd shrink_step(const Eigen::MatrixXd& filled, double lambda) {
    if (!filled.allFinite()) {
        throw SvdFailure("shrink_step requires a complete, finite matrix");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw SvdFailure("singular value decomposition did not converge");
    }
    const Eigen::VectorXd shrunk = soft_threshold(svd.singularValues(), lambda);
    return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

SeriesMatrix soft_impute(const SeriesMatrix& m, const SoftImputeConfig& cfg,
                         SoftImputeInfo* info) {
    check_config(cfg);
    if (m.space() != Space::Normalized) {
        throw SpaceMismatch("soft_impute expects a Normalized-space matrix");
    }
    const Eigen::VectorXd means = station_means(m);  // also enforces per-station data

    if (info) {
        *info = {};
        info->lambda = cfg.lambda;
    }
    const Mask all_observed = Mask::Constant(m.rows(), m.stations(), true);
    if (m.fully_observed()) {
        if (info) info->converged = true;
        return SeriesMatrix(m.start_hour(), m.values(), all_observed, m.station_ids(),
                            m.space());
    }

    // Current estimate: observed cells fixed, masked cells start per cfg.init.
    Eigen::MatrixXd estimate = m.values();
    for (Eigen::Index s = 0; s < m.stations(); ++s) {
        const double fill = cfg.init == SoftImputeInit::ColumnMean ? means(s) : 0.0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (!m.is_observed(r, s)) estimate(r, s) = fill;
        }
    }

    bool converged = false;
    int iter = 0;
    double delta = 0.0;
    for (; iter < cfg.max_iter; ++iter) {
        Eigen::MatrixXd next = shrink_step(estimate, cfg.lambda);
        // Restore observed cells to their true values.
        next = m.mask().select(m.values(), next);
        delta = (next - estimate).norm() /
                std::max(estimate.norm(), std::numeric_limits<double>::min());
        estimate = std::move(next);
        if (info) info->delta_history.push_back(delta);
        if (delta <= cfg.tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (info) {
        info->iterations = iter;
        info->final_delta = delta;
        info->converged = converged;
    }
    return SeriesMatrix(m.start_hour(), std::move(estimate), all_observed, m.station_ids(),
                        m.space());
}

double select_lambda(const SeriesMatrix& m, std::span<const double> grid,
                     double holdout_fraction, std::uint64_t seed,
                     const SoftImputeConfig& base) {
    if (grid.empty()) throw InvalidConfig("lambda grid must be non-empty");
    if (!(holdout_fraction > 0.0 && holdout_fraction <= 0.5)) {
        throw InvalidConfig("holdout fraction must lie in (0, 0.5]");
    }
    const Injection holdout = inject_random(m, holdout_fraction, seed);
    if (holdout.record.cells.empty()) {
        throw NoObservedData("holdout draw selected no cells");
    }
    std::vector<double> truth;
    truth.reserve(holdout.record.cells.size());
    for (const Cell& c : holdout.record.cells) truth.push_back(m.values()(c.row, c.station));

    double best_lambda = 0.0;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> predicted(truth.size());
    for (const double lambda : sorted) {
        SoftImputeConfig cfg = base;
        cfg.lambda = lambda;
        const SeriesMatrix completed = soft_impute(holdout.masked, cfg);
        for (std::size_t i = 0; i < holdout.record.cells.size(); ++i) {
            const Cell& c = holdout.record.cells[i];
            predicted[i] = completed.values()(c.row, c.station);
        }
        const double err = rmse(truth, predicted);
        if (err <= best_rmse) {  // <= : ties break toward the larger lambda
            best_rmse = err;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

} // namespace gapdyn
