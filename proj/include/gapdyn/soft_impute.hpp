#pragma once

#include "gapdyn/series.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gapdyn {

enum class SoftImputeInit { Zero, ColumnMean };

struct SoftImputeConfig {
    double lambda = 0.0;    // singular-value shrinkage
    double tol = 1e-5;      // relative Frobenius change stop, in (0, 1)
    int max_iter = 500;
    SoftImputeInit init = SoftImputeInit::ColumnMean;
};

/// Per-run convergence record. Non-convergence is not an error; the best
/// iterate is returned with `converged` false.
struct SoftImputeInfo {
    int iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
    std::vector<double> delta_history;  // relative Frobenius change per iteration
    double lambda = 0.0;
};

/// max(sigma - lambda, 0) elementwise; order preserved.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& singular_values, double lambda);

/// U * diag(soft_threshold(S, lambda)) * V^T from the SVD of a complete
/// matrix. Throws SvdFailure on a non-finite input or a failed decomposition.
Eigen::MatrixXd shrink_step(const Eigen::MatrixXd& filled, double lambda);

/// Matrix completion by iterative soft-thresholded SVD: fill masked cells
/// from the current estimate, shrink, restore observed cells, repeat until
/// the relative Frobenius change of the estimate drops to cfg.tol or
/// cfg.max_iter is reached. Output has every cell filled; observed cells are
/// bit-identical to the input. Expects a Normalized-space matrix.
SeriesMatrix soft_impute(const SeriesMatrix& m, const SoftImputeConfig& cfg,
                         SoftImputeInfo* info = nullptr);

/// Picks the shrinkage from `grid` by masking a seeded random holdout of
/// observed cells and minimizing holdout RMSE; ties go to the larger lambda.
double select_lambda(const SeriesMatrix& m, std::span<const double> grid,
                     double holdout_fraction, std::uint64_t seed,
                     const SoftImputeConfig& base = {});

} // namespace gapdyn
