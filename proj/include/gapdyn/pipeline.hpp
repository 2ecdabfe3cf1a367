#pragma once

#include "gapdyn/knn_impute.hpp"
#include "gapdyn/metrics.hpp"
#include "gapdyn/missingness.hpp"
#include "gapdyn/normalize.hpp"
#include "gapdyn/series.hpp"
#include "gapdyn/sindy.hpp"
#include "gapdyn/soft_impute.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gapdyn {

enum class SweepRegime { Random, Block, Mixed };

/// Which rows normalization parameters are fitted on.
enum class NormScope { TrainOnly, Joint };

/// Which rows the imputers see: the train+eval concatenation or the
/// evaluation period alone.
enum class ImputeScope { Concatenated, EvalOnly };

std::vector<double> default_lambda_grid();  // 7 log-spaced points, 1e-2..1e2

struct ExperimentConfig {
    HourRange train_range;
    HourRange eval_range;
    std::vector<double> missing_levels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    SweepRegime regime = SweepRegime::Random;
    std::int64_t block_min_len = 6;
    std::int64_t block_max_len = 72;
    std::uint64_t seed = 0;

    SoftImputeConfig si;
    bool lambda_auto = true;  // when set, si.lambda is replaced via select_lambda
    std::vector<double> lambda_grid = default_lambda_grid();
    double lambda_holdout = 0.2;

    KnnConfig knn;

    sindy::LibrarySpec library;
    double sindy_threshold = 0.05;
    double sindy_ridge = 1e-6;
    int sindy_max_rounds = 20;
    int refine_passes = 1;

    NormScope norm_scope = NormScope::TrainOnly;
    ImputeScope impute_scope = ImputeScope::Concatenated;
};

struct MethodResult {
    std::string method;
    double level = 0.0;
    bool failed = false;
    std::string error;  // error code + message when failed
    double pooled_ioa = 0.0;
    double pooled_rmse = 0.0;
    Eigen::Index n_cells = 0;
    std::vector<StationScore> stations;
    std::optional<SoftImputeInfo> convergence;  // present for SI-backed methods
};

struct LevelInjection {
    double level = 0.0;
    Eigen::Index n_cells = 0;
    std::vector<InjectionRecord> records;  // one per regime drawn at this level
};

struct ExperimentReport {
    nlohmann::ordered_json config;  // canonical echo of the effective config
    std::uint64_t seed = 0;
    double lambda = 0.0;  // shrinkage actually used by SI
    bool lambda_selected = false;
    nlohmann::ordered_json sindy_summary;
    std::vector<std::string> methods;  // fixed order: SI, KNN, SI-SINDy, KNN-SINDy
    std::vector<double> levels;
    std::vector<LevelInjection> injections;
    std::vector<MethodResult> results;  // level-major, methods in fixed order
};

/// The full comparison protocol: fit normalization and the dynamics model on
/// the training range, then per missing level inject into the evaluation
/// range, impute with SI and KNN, refine each with the model, denormalize,
/// and score at the injected cells. A failing (method, level) combination is
/// recorded as failed in the report instead of aborting the sweep.
ExperimentReport run_experiment(const SeriesMatrix& data, const ExperimentConfig& cfg);

enum class ReportFormat { Json, Csv };

/// Deterministic serialization: identical reports emit identical bytes.
std::string emit_report(const ExperimentReport& report, ReportFormat format);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Shortest round-trip decimal rendering used by every text artifact.
std::string format_double(double v);

} // namespace gapdyn
