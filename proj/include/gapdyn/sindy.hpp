#pragma once

#include "gapdyn/series.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace gapdyn::sindy {

/// Polynomial candidate library layout. Terms are ordered graded-lex:
/// [1, x_1, ..., x_S, x_1^2, x_1 x_2, ..., x_S^degree]. The term count is
/// C(S + degree, degree), minus one when the constant is excluded.
struct LibrarySpec {
    int degree = 2;
    bool include_constant = true;
};

Eigen::Index library_size(Eigen::Index stations, const LibrarySpec& spec);

/// Exponent tuples (sorted state-index multisets) in library order; the
/// constant term is the empty tuple.
std::vector<std::vector<Eigen::Index>> library_terms(Eigen::Index stations,
                                                     const LibrarySpec& spec);

/// Evaluates the candidate library on every row of a complete state matrix;
/// returns N×L.
Eigen::MatrixXd build_library(const Eigen::MatrixXd& states, const LibrarySpec& spec);

/// Sequentially thresholded least squares. Per target column: ridge
/// least squares on the active terms, zero coefficients below `threshold`,
/// refit on the surviving support, repeat until the support is stable or
/// max_rounds is hit. Every nonzero entry of the result has magnitude
/// >= threshold.
Eigen::MatrixXd stlsq(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets,
                      double threshold, double ridge, int max_rounds);

struct Diagnostics {
    std::vector<double> train_rmse;        // one-step residual per station
    std::vector<Eigen::Index> nonzero_counts;
    Eigen::Index pairs_used = 0;
};

/// Sparse one-step state predictor x_{t+1} = library(x_t) * xi.
struct SindyModel {
    std::vector<std::string> station_ids;
    LibrarySpec library;
    double threshold = 0.05;
    double ridge = 1e-6;
    Eigen::MatrixXd xi;  // L×S
    Diagnostics diagnostics;
};

/// Fits on consecutive fully observed row pairs of a Normalized-space
/// training matrix; a masked cell in either row drops the pair. Throws
/// InsufficientPairs when fewer usable pairs than library terms remain.
SindyModel fit(const SeriesMatrix& train, const LibrarySpec& spec, double threshold,
               double ridge, int max_rounds = 20);

Eigen::VectorXd predict_one_step(const SindyModel& model, const Eigen::VectorXd& state);

/// Forward pass over rows 1..T-1: each missing cell (t, s) is overwritten
/// with component s of the model's prediction from row t-1 of the pass
/// input, so every refined cell stays anchored on the imputer's values (or,
/// for passes beyond the first, on the previous pass's output). Row-0
/// missing cells keep their imputed values; cells outside `missing_cells`
/// are untouched.
SeriesMatrix refine_imputation(const SindyModel& model, const SeriesMatrix& imputed,
                               const std::vector<Cell>& missing_cells, int passes = 1);

/// Round-trips bit-exactly: a loaded model reproduces predictions of the
/// saved one to the last bit.
nlohmann::ordered_json model_to_json(const SindyModel& model);
SindyModel model_from_json(const nlohmann::json& j);

} // namespace gapdyn::sindy
