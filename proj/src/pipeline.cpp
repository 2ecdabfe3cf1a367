#include "gapdyn/pipeline.hpp"

#include "gapdyn/errors.hpp"
#include "gapdyn/rng.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>

namespace gapdyn {

namespace {

constexpr std::uint64_t kLambdaSalt = 0x6c616d6264617365ULL;

std::uint64_t seed_for_level(std::uint64_t seed, double level) {
    return seed ^ mix64(std::bit_cast<std::uint64_t>(level));
}

bool overlaps(HourRange a, HourRange b) {
    return a.begin < b.end && b.begin < a.end;
}

bool covers(HourRange outer, HourRange inner) {
    return inner.begin >= outer.begin && inner.end <= outer.end;
}

// Rows outside both ranges forced to missing; values untouched elsewhere.
SeriesMatrix mask_outside(const SeriesMatrix& m, HourRange a, HourRange b) {
    Mask mask = m.mask();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const std::int64_t h = m.hour_at(r);
        if (!a.contains(h) && !b.contains(h)) mask.row(r).setConstant(false);
    }
    return SeriesMatrix(m.start_hour(), m.values(), std::move(mask), m.station_ids(),
                        m.space());
}

// Replaces the rows of `span` covered by `part` with `part`'s rows.
SeriesMatrix overlay(const SeriesMatrix& span, const SeriesMatrix& part) {
    const Eigen::Index offset = part.start_hour() - span.start_hour();
    Eigen::MatrixXd values = span.values();
    Mask mask = span.mask();
    values.middleRows(offset, part.rows()) = part.values();
    mask.middleRows(offset, part.rows()) = part.mask();
    return SeriesMatrix(span.start_hour(), std::move(values), std::move(mask),
                        span.station_ids(), span.space());
}

void validate_config(const SeriesMatrix& data, const ExperimentConfig& cfg) {
    if (cfg.train_range.empty() || cfg.eval_range.empty()) {
        throw InvalidConfig("train and eval ranges must be non-empty");
    }
    if (overlaps(cfg.train_range, cfg.eval_range)) {
        throw InvalidConfig("train and eval ranges must be disjoint");
    }
    if (!covers(data.span(), cfg.train_range) || !covers(data.span(), cfg.eval_range)) {
        throw InvalidConfig("data does not span the configured ranges");
    }
    double prev = 0.0;
    for (const double level : cfg.missing_levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw InvalidConfig("missing levels must lie strictly inside (0, 1)");
        }
        if (level <= prev) throw InvalidConfig("missing levels must be strictly increasing");
        prev = level;
    }
    if (cfg.refine_passes < 1) throw InvalidConfig("refine_passes must be >= 1");
}

void score_into(MethodResult& result, const SeriesMatrix& truth, const SeriesMatrix& estimate,
                const std::vector<Cell>& cells) {
    const CellScores scores = score_at_cells(truth, estimate, cells);
    result.pooled_ioa = scores.pooled_ioa;
    result.pooled_rmse = scores.pooled_rmse;
    result.n_cells = scores.pooled_cells;
    result.stations = scores.stations;
}

void mark_failed(MethodResult& result, const std::string& error,
                 const std::vector<std::string>& station_ids) {
    result.failed = true;
    result.error = error;
    result.stations.clear();
    for (const auto& id : station_ids) {
        result.stations.push_back({id, 0, std::nullopt, std::nullopt});
    }
}

} // namespace

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 7; ++i) {
        grid.push_back(std::pow(10.0, -2.0 + static_cast<double>(i) * (4.0 / 6.0)));
    }
    return grid;
}

ExperimentReport run_experiment(const SeriesMatrix& data, const ExperimentConfig& cfg) {
    validate_config(data, cfg);

    ExperimentReport report;
    report.config = config_to_json(cfg);
    report.seed = cfg.seed;
    report.methods = {"SI", "KNN", "SI-SINDy", "KNN-SINDy"};
    report.levels = cfg.missing_levels;

    const SeriesMatrix train = restrict_hours(data, cfg.train_range);
    const SeriesMatrix eval_truth = restrict_hours(data, cfg.eval_range);
    if (observed_fraction(train) < 0.9) {
        throw InvalidConfig("training range must be at least 90% observed");
    }

    const HourRange span_range{std::min(cfg.train_range.begin, cfg.eval_range.begin),
                               std::max(cfg.train_range.end, cfg.eval_range.end)};
    const NormParams params =
        cfg.norm_scope == NormScope::TrainOnly
            ? fit_normalization(train)
            : fit_normalization(mask_outside(restrict_hours(data, span_range),
                                             cfg.train_range, cfg.eval_range));
    const SeriesMatrix norm_train = normalize(train, params);
    const SeriesMatrix norm_eval = normalize(eval_truth, params);
    std::optional<SeriesMatrix> norm_span;
    if (cfg.impute_scope == ImputeScope::Concatenated) {
        norm_span = normalize(mask_outside(restrict_hours(data, span_range), cfg.train_range,
                                           cfg.eval_range),
                              params);
    }

    double lambda = cfg.si.lambda;
    std::string lambda_error;
    if (cfg.lambda_auto) {
        try {
            lambda = select_lambda(norm_train, cfg.lambda_grid, cfg.lambda_holdout,
                                   mix64(cfg.seed ^ kLambdaSalt), cfg.si);
            report.lambda_selected = true;
        } catch (const Error& e) {
            lambda_error = e.what();
        }
    }
    report.lambda = lambda;

    std::optional<sindy::SindyModel> model;
    std::string model_error;
    try {
        model = sindy::fit(norm_train, cfg.library, cfg.sindy_threshold, cfg.sindy_ridge,
                           cfg.sindy_max_rounds);
        report.sindy_summary = {{"pairs_used", model->diagnostics.pairs_used},
                                {"train_rmse", model->diagnostics.train_rmse},
                                {"nonzero_counts", model->diagnostics.nonzero_counts}};
    } catch (const Error& e) {
        model_error = e.what();
        report.sindy_summary = {{"error", model_error}};
    }

    for (const double level : cfg.missing_levels) {
        const std::uint64_t level_seed = seed_for_level(cfg.seed, level);
        LevelInjection li;
        li.level = level;

        std::optional<SeriesMatrix> injected;
        switch (cfg.regime) {
        case SweepRegime::Random: {
            Injection inj = inject_random(norm_eval, level, level_seed);
            injected = std::move(inj.masked);
            li.records.push_back(std::move(inj.record));
            break;
        }
        case SweepRegime::Block: {
            Injection inj = inject_blocks(norm_eval, level, cfg.block_min_len,
                                          cfg.block_max_len, level_seed);
            injected = std::move(inj.masked);
            li.records.push_back(std::move(inj.record));
            break;
        }
        case SweepRegime::Mixed: {
            // Half the cell budget as per-station blocks, the rest as random
            // cells drawn on top, so the total count stays exact.
            const double observed = static_cast<double>(norm_eval.observed_count());
            const Eigen::Index total =
                static_cast<Eigen::Index>(std::llround(level * observed));
            const Eigen::Index from_blocks = total / 2;
            Injection blocks = inject_blocks_count(norm_eval, from_blocks, cfg.block_min_len,
                                                   cfg.block_max_len, level_seed);
            blocks.record.regime = BlockRegime{static_cast<double>(from_blocks) / observed,
                                               cfg.block_min_len, cfg.block_max_len};
            Injection random = inject_random_count(blocks.masked, total - from_blocks,
                                                   mix64(level_seed));
            random.record.regime =
                RandomRegime{static_cast<double>(total - from_blocks) / observed};
            injected = std::move(random.masked);
            li.records.push_back(std::move(blocks.record));
            li.records.push_back(std::move(random.record));
            break;
        }
        }

        std::vector<Cell> scored_cells;
        for (const auto& record : li.records) {
            scored_cells.insert(scored_cells.end(), record.cells.begin(),
                                record.cells.end());
        }
        std::sort(scored_cells.begin(), scored_cells.end());
        li.n_cells = static_cast<Eigen::Index>(scored_cells.size());

        std::vector<Cell> missing_cells;  // original + injected
        for (Eigen::Index r = 0; r < injected->rows(); ++r) {
            for (Eigen::Index s = 0; s < injected->stations(); ++s) {
                if (!injected->is_observed(r, s)) missing_cells.push_back({r, s});
            }
        }

        const SeriesMatrix impute_input =
            norm_span ? overlay(*norm_span, *injected) : *injected;

        const auto blank_result = [level](const char* name) {
            MethodResult r;
            r.method = name;
            r.level = level;
            return r;
        };
        MethodResult si_result = blank_result("SI");
        MethodResult knn_result = blank_result("KNN");
        MethodResult si_sindy_result = blank_result("SI-SINDy");
        MethodResult knn_sindy_result = blank_result("KNN-SINDy");

        std::optional<SeriesMatrix> si_eval;
        if (!lambda_error.empty()) {
            mark_failed(si_result, lambda_error, eval_truth.station_ids());
        } else {
            try {
                SoftImputeConfig si_cfg = cfg.si;
                si_cfg.lambda = lambda;
                SoftImputeInfo info;
                SeriesMatrix completed = soft_impute(impute_input, si_cfg, &info);
                si_eval = norm_span ? restrict_hours(completed, cfg.eval_range)
                                    : std::move(completed);
                si_result.convergence = info;
                score_into(si_result, eval_truth, denormalize(*si_eval, params),
                           scored_cells);
            } catch (const Error& e) {
                mark_failed(si_result, e.what(), eval_truth.station_ids());
                si_eval.reset();
            }
        }

        std::optional<SeriesMatrix> knn_eval;
        try {
            SeriesMatrix completed = knn_impute(impute_input, cfg.knn);
            knn_eval = norm_span ? restrict_hours(completed, cfg.eval_range)
                                 : std::move(completed);
            score_into(knn_result, eval_truth, denormalize(*knn_eval, params), scored_cells);
        } catch (const Error& e) {
            mark_failed(knn_result, e.what(), eval_truth.station_ids());
            knn_eval.reset();
        }

        if (!model) {
            mark_failed(si_sindy_result, model_error, eval_truth.station_ids());
            mark_failed(knn_sindy_result, model_error, eval_truth.station_ids());
        } else {
            if (!si_eval) {
                mark_failed(si_sindy_result, "upstream SI failed: " + si_result.error,
                            eval_truth.station_ids());
            } else {
                try {
                    const SeriesMatrix refined = sindy::refine_imputation(
                        *model, *si_eval, missing_cells, cfg.refine_passes);
                    si_sindy_result.convergence = si_result.convergence;
                    score_into(si_sindy_result, eval_truth, denormalize(refined, params),
                               scored_cells);
                } catch (const Error& e) {
                    mark_failed(si_sindy_result, e.what(), eval_truth.station_ids());
                }
            }
            if (!knn_eval) {
                mark_failed(knn_sindy_result, "upstream KNN failed: " + knn_result.error,
                            eval_truth.station_ids());
            } else {
                try {
                    const SeriesMatrix refined = sindy::refine_imputation(
                        *model, *knn_eval, missing_cells, cfg.refine_passes);
                    score_into(knn_sindy_result, eval_truth, denormalize(refined, params),
                               scored_cells);
                } catch (const Error& e) {
                    mark_failed(knn_sindy_result, e.what(), eval_truth.station_ids());
                }
            }
        }

        report.injections.push_back(std::move(li));
        report.results.push_back(std::move(si_result));
        report.results.push_back(std::move(knn_result));
        report.results.push_back(std::move(si_sindy_result));
        report.results.push_back(std::move(knn_sindy_result));
    }
    return report;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
    nlohmann::ordered_json j;
    j["config"] = report.config;
    j["seed"] = report.seed;
    j["lambda"] = {{"value", report.lambda}, {"selected", report.lambda_selected}};
    j["sindy"] = report.sindy_summary;
    j["methods"] = report.methods;
    j["levels"] = report.levels;

    nlohmann::ordered_json injections = nlohmann::ordered_json::array();
    for (const auto& li : report.injections) {
        nlohmann::ordered_json regimes = nlohmann::ordered_json::array();
        for (const auto& record : li.records) {
            regimes.push_back(std::holds_alternative<RandomRegime>(record.regime)
                                  ? "random"
                                  : "block");
        }
        injections.push_back(
            {{"level", li.level}, {"n_cells", li.n_cells}, {"regimes", std::move(regimes)}});
    }
    j["injections"] = std::move(injections);

    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    for (const auto& r : report.results) {
        nlohmann::ordered_json entry;
        entry["method"] = r.method;
        entry["level"] = r.level;
        entry["status"] = r.failed ? "failed" : "ok";
        if (r.failed) {
            entry["error"] = r.error;
        } else {
            entry["pooled"] = {{"ioa", r.pooled_ioa},
                               {"rmse", r.pooled_rmse},
                               {"n_cells", r.n_cells}};
            nlohmann::ordered_json stations = nlohmann::ordered_json::array();
            for (const auto& s : r.stations) {
                nlohmann::ordered_json st;
                st["id"] = s.station_id;
                st["n_cells"] = s.n_cells;
                st["ioa"] = s.ioa ? nlohmann::ordered_json(*s.ioa)
                                  : nlohmann::ordered_json(nullptr);
                st["rmse"] = s.rmse ? nlohmann::ordered_json(*s.rmse)
                                    : nlohmann::ordered_json(nullptr);
                stations.push_back(std::move(st));
            }
            entry["stations"] = std::move(stations);
            if (r.convergence) {
                entry["convergence"] = {{"iterations", r.convergence->iterations},
                                        {"final_delta", r.convergence->final_delta},
                                        {"converged", r.convergence->converged},
                                        {"lambda", r.convergence->lambda}};
            }
        }
        results.push_back(std::move(entry));
    }
    j["results"] = std::move(results);

    // Plot-ready: level vs pooled IOA per method, null where the run failed.
    nlohmann::ordered_json series;
    for (const auto& method : report.methods) {
        nlohmann::ordered_json points = nlohmann::ordered_json::array();
        for (const auto& r : report.results) {
            if (r.method != method) continue;
            points.push_back({r.level, r.failed ? nlohmann::ordered_json(nullptr)
                                                : nlohmann::ordered_json(r.pooled_ioa)});
        }
        series[method] = std::move(points);
    }
    j["series"] = std::move(series);
    return j;
}

} // namespace

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        return report_to_json(report).dump(2) + "\n";
    }
    std::string out = "method,level,scope,ioa,rmse,n_cells\n";
    for (const auto& r : report.results) {
        out += r.method + ',' + format_double(r.level) + ",pooled,";
        if (!r.failed) {
            out += format_double(r.pooled_ioa) + ',' + format_double(r.pooled_rmse) + ',' +
                   std::to_string(r.n_cells);
        } else {
            out += ",,0";
        }
        out += '\n';
        for (const auto& s : r.stations) {
            out += r.method + ',' + format_double(r.level) + ',' + s.station_id + ',';
            if (s.ioa) out += format_double(*s.ioa);
            out += ',';
            if (s.rmse) out += format_double(*s.rmse);
            out += ',';
            out += std::to_string(s.n_cells);
            out += '\n';
        }
    }
    return out;
}

namespace {

std::string regime_name(SweepRegime regime) {
    switch (regime) {
    case SweepRegime::Random: return "random";
    case SweepRegime::Block: return "block";
    case SweepRegime::Mixed: return "mixed";
    }
    return "random";
}

SweepRegime regime_from_name(const std::string& name) {
    if (name == "random") return SweepRegime::Random;
    if (name == "block") return SweepRegime::Block;
    if (name == "mixed") return SweepRegime::Mixed;
    throw InvalidConfig("unknown regime '" + name + "'");
}

} // namespace

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["train_range"] = {cfg.train_range.begin, cfg.train_range.end};
    j["eval_range"] = {cfg.eval_range.begin, cfg.eval_range.end};
    j["missing_levels"] = cfg.missing_levels;
    j["regime"] = regime_name(cfg.regime);
    j["block_min_len"] = cfg.block_min_len;
    j["block_max_len"] = cfg.block_max_len;
    j["seed"] = cfg.seed;
    j["soft_impute"] = {
        {"lambda", cfg.si.lambda},
        {"lambda_auto", cfg.lambda_auto},
        {"lambda_grid", cfg.lambda_grid},
        {"lambda_holdout", cfg.lambda_holdout},
        {"tol", cfg.si.tol},
        {"max_iter", cfg.si.max_iter},
        {"init", cfg.si.init == SoftImputeInit::ColumnMean ? "column_mean" : "zero"}};
    j["knn"] = {{"k", cfg.knn.k}};
    j["sindy"] = {{"degree", cfg.library.degree},
                  {"include_constant", cfg.library.include_constant},
                  {"threshold", cfg.sindy_threshold},
                  {"ridge", cfg.sindy_ridge},
                  {"max_rounds", cfg.sindy_max_rounds},
                  {"refine_passes", cfg.refine_passes}};
    j["norm_scope"] = cfg.norm_scope == NormScope::TrainOnly ? "train_only" : "joint";
    j["impute_scope"] =
        cfg.impute_scope == ImputeScope::Concatenated ? "concatenated" : "eval_only";
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("train_range")) {
        cfg.train_range = {j["train_range"].at(0).get<std::int64_t>(),
                           j["train_range"].at(1).get<std::int64_t>()};
    }
    if (j.contains("eval_range")) {
        cfg.eval_range = {j["eval_range"].at(0).get<std::int64_t>(),
                          j["eval_range"].at(1).get<std::int64_t>()};
    }
    cfg.missing_levels = j.value("missing_levels", cfg.missing_levels);
    if (j.contains("regime")) cfg.regime = regime_from_name(j["regime"].get<std::string>());
    cfg.block_min_len = j.value("block_min_len", cfg.block_min_len);
    cfg.block_max_len = j.value("block_max_len", cfg.block_max_len);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("soft_impute")) {
        const auto& si = j["soft_impute"];
        cfg.si.lambda = si.value("lambda", cfg.si.lambda);
        cfg.lambda_auto = si.value("lambda_auto", cfg.lambda_auto);
        cfg.lambda_grid = si.value("lambda_grid", cfg.lambda_grid);
        cfg.lambda_holdout = si.value("lambda_holdout", cfg.lambda_holdout);
        cfg.si.tol = si.value("tol", cfg.si.tol);
        cfg.si.max_iter = si.value("max_iter", cfg.si.max_iter);
        if (si.contains("init")) {
            const std::string init = si["init"].get<std::string>();
            if (init == "column_mean") {
                cfg.si.init = SoftImputeInit::ColumnMean;
            } else if (init == "zero") {
                cfg.si.init = SoftImputeInit::Zero;
            } else {
                throw InvalidConfig("unknown soft_impute init '" + init + "'");
            }
        }
    }
    if (j.contains("knn")) cfg.knn.k = j["knn"].value("k", cfg.knn.k);
    if (j.contains("sindy")) {
        const auto& sj = j["sindy"];
        cfg.library.degree = sj.value("degree", cfg.library.degree);
        cfg.library.include_constant =
            sj.value("include_constant", cfg.library.include_constant);
        cfg.sindy_threshold = sj.value("threshold", cfg.sindy_threshold);
        cfg.sindy_ridge = sj.value("ridge", cfg.sindy_ridge);
        cfg.sindy_max_rounds = sj.value("max_rounds", cfg.sindy_max_rounds);
        cfg.refine_passes = sj.value("refine_passes", cfg.refine_passes);
    }
    if (j.contains("norm_scope")) {
        const std::string scope = j["norm_scope"].get<std::string>();
        if (scope == "train_only") {
            cfg.norm_scope = NormScope::TrainOnly;
        } else if (scope == "joint") {
            cfg.norm_scope = NormScope::Joint;
        } else {
            throw InvalidConfig("unknown norm_scope '" + scope + "'");
        }
    }
    if (j.contains("impute_scope")) {
        const std::string scope = j["impute_scope"].get<std::string>();
        if (scope == "concatenated") {
            cfg.impute_scope = ImputeScope::Concatenated;
        } else if (scope == "eval_only") {
            cfg.impute_scope = ImputeScope::EvalOnly;
        } else {
            throw InvalidConfig("unknown impute_scope '" + scope + "'");
        }
    }
    return cfg;
}

} // namespace gapdyn
