// gapdyn: imputation and evaluation toolkit for gappy hourly station series.
//
// Commands: ingest, inject, impute, sindy fit, sindy predict, experiment,
// report. Data and output paths go to stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include "gapdyn/csv.hpp"
#include "gapdyn/errors.hpp"
#include "gapdyn/knn_impute.hpp"
#include "gapdyn/metrics.hpp"
#include "gapdyn/missingness.hpp"
#include "gapdyn/normalize.hpp"
#include "gapdyn/pipeline.hpp"
#include "gapdyn/series.hpp"
#include "gapdyn/sindy.hpp"
#include "gapdyn/soft_impute.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace gapdyn;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write '" + path + "'");
    out << bytes;
}

std::int64_t parse_hour_token(const std::string& token) {
    if (token.find('T') != std::string::npos) return parse_timestamp(token);
    std::int64_t hour = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), hour);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw UsageError("bad hour token '" + token +
                         "', expected an epoch hour or YYYY-MM-DDTHH:00");
    }
    return hour;
}

// "BEGIN/END", each part an epoch hour or a timestamp; half-open.
HourRange parse_range(const std::string& text) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
        throw UsageError("bad range '" + text + "', expected BEGIN/END");
    }
    HourRange r{parse_hour_token(text.substr(0, slash)),
                parse_hour_token(text.substr(slash + 1))};
    if (r.empty()) throw UsageError("range '" + text + "' is empty");
    return r;
}

double parse_lambda_flag(const std::string& text) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || v < 0) {
        throw UsageError("--lambda must be 'auto' or a non-negative number");
    }
    return v;
}

NormParams fit_params(const SeriesMatrix& data, const std::optional<HourRange>& range) {
    return fit_normalization(range ? restrict_hours(data, *range) : data);
}

std::vector<Cell> missing_cells_of(const SeriesMatrix& m) {
    std::vector<Cell> cells;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index s = 0; s < m.stations(); ++s) {
            if (!m.is_observed(r, s)) cells.push_back({r, s});
        }
    }
    return cells;
}

struct ImputeArgs {
    std::string input;
    std::string output;
    std::string method;
    std::string lambda = "auto";
    int k = 5;
    std::string model_path;
    std::string train_range;
    std::uint64_t seed = 0;
    int degree = 2;
    double threshold = 0.05;
    double ridge = 1e-6;
};

int cmd_impute(const ImputeArgs& args) {
    const bool hybrid = args.method == "si-sindy" || args.method == "knn-sindy";
    if (args.method != "si" && args.method != "knn" && !hybrid) {
        throw UsageError("unknown --method '" + args.method + "'");
    }
    if (hybrid && args.model_path.empty() && args.train_range.empty()) {
        throw UsageError("--method " + args.method + " needs --model or --train-range");
    }

    const SeriesMatrix raw = parse_csv(read_file(args.input));
    std::optional<HourRange> train_range;
    if (!args.train_range.empty()) train_range = parse_range(args.train_range);

    // A model file written by `sindy fit` carries its normalization; reuse it
    // so refinement happens in the space the model was trained in.
    std::optional<sindy::SindyModel> model;
    std::optional<NormParams> params;
    if (!args.model_path.empty()) {
        const auto j = nlohmann::json::parse(read_file(args.model_path));
        model = sindy::model_from_json(j);
        if (j.contains("norm")) params = norm_from_json(j["norm"]);
    }
    if (!params) params = fit_params(raw, train_range);
    const SeriesMatrix norm = normalize(raw, *params);
    if (hybrid && !model) {
        model = sindy::fit(restrict_hours(norm, *train_range), {.degree = args.degree},
                           args.threshold, args.ridge);
    }

    SeriesMatrix completed = norm;
    if (args.method == "si" || args.method == "si-sindy") {
        SoftImputeConfig cfg;
        if (args.lambda == "auto") {
            const SeriesMatrix lambda_scope =
                train_range ? restrict_hours(norm, *train_range) : norm;
            cfg.lambda = select_lambda(lambda_scope, default_lambda_grid(), 0.2, args.seed);
        } else {
            cfg.lambda = parse_lambda_flag(args.lambda);
        }
        SoftImputeInfo info;
        completed = soft_impute(norm, cfg, &info);
        std::cerr << "soft-impute: lambda=" << format_double(info.lambda)
                  << " iterations=" << info.iterations
                  << " converged=" << (info.converged ? "yes" : "no")
                  << " final_delta=" << format_double(info.final_delta) << "\n";
    } else {
        completed = knn_impute(norm, {.k = args.k});
        std::cerr << "knn-impute: k=" << args.k << "\n";
    }

    if (hybrid) {
        completed = sindy::refine_imputation(*model, completed, missing_cells_of(norm));
        std::cerr << "sindy refinement: stations=" << model->station_ids.size()
                  << " library_terms=" << model->xi.rows() << "\n";
    }

    write_file(args.output, write_csv(denormalize(completed, *params)));
    std::cout << args.output << "\n";
    return 0;
}

struct InjectArgs {
    std::string input;
    std::string output;
    std::string record_path;
    double fraction = 0.0;
    std::string regime = "random";
    std::int64_t min_len = 6;
    std::int64_t max_len = 72;
    std::uint64_t seed = 0;
};

int cmd_inject(const InjectArgs& args) {
    if (!(args.fraction > 0.0 && args.fraction < 1.0)) {
        throw UsageError("--fraction must lie strictly inside (0, 1)");
    }
    const SeriesMatrix raw = parse_csv(read_file(args.input));
    const Injection inj = [&] {
        if (args.regime == "random") return inject_random(raw, args.fraction, args.seed);
        if (args.regime == "block") {
            return inject_blocks(raw, args.fraction, args.min_len, args.max_len, args.seed);
        }
        throw UsageError("--regime must be 'random' or 'block'");
    }();
    write_file(args.output, write_csv(inj.masked));
    const std::string record_path =
        args.record_path.empty() ? args.output + ".record.json" : args.record_path;
    write_file(record_path, record_to_json(inj.record).dump() + "\n");
    std::cerr << "injected " << inj.record.cells.size() << " cells (seed " << args.seed
              << ")\n";
    std::cout << args.output << "\n" << record_path << "\n";
    return 0;
}

struct SindyFitArgs {
    std::string input;
    std::string output;
    std::string train_range;
    int degree = 2;
    bool no_constant = false;
    double threshold = 0.05;
    double ridge = 1e-6;
    int max_rounds = 20;
};

int cmd_sindy_fit(const SindyFitArgs& args) {
    const SeriesMatrix raw = parse_csv(read_file(args.input));
    std::optional<HourRange> range;
    if (!args.train_range.empty()) range = parse_range(args.train_range);
    const NormParams params = fit_params(raw, range);
    const SeriesMatrix norm = normalize(raw, params);
    const SeriesMatrix train = range ? restrict_hours(norm, *range) : norm;

    const sindy::SindyModel model =
        sindy::fit(train, {.degree = args.degree, .include_constant = !args.no_constant},
                   args.threshold, args.ridge, args.max_rounds);
    nlohmann::ordered_json j = sindy::model_to_json(model);
    j["norm"] = norm_to_json(params);
    write_file(args.output, j.dump(2) + "\n");

    std::cerr << "fit on " << model.diagnostics.pairs_used << " pairs;";
    for (std::size_t s = 0; s < model.station_ids.size(); ++s) {
        std::cerr << " " << model.station_ids[s]
                  << ": nnz=" << model.diagnostics.nonzero_counts[s]
                  << " rmse=" << format_double(model.diagnostics.train_rmse[s]);
    }
    std::cerr << "\n";
    std::cout << args.output << "\n";
    return 0;
}

struct SindyPredictArgs {
    std::string input;
    std::string model_path;
    std::string output;
};

int cmd_sindy_predict(const SindyPredictArgs& args) {
    const auto j = nlohmann::json::parse(read_file(args.model_path));
    const sindy::SindyModel model = sindy::model_from_json(j);
    std::optional<NormParams> params;
    if (j.contains("norm")) params = norm_from_json(j["norm"]);

    const SeriesMatrix states = parse_csv(read_file(args.input));
    if (states.stations() != static_cast<Eigen::Index>(model.station_ids.size())) {
        throw ShapeMismatch("state CSV station count does not match the model");
    }

    Eigen::MatrixXd values =
        Eigen::MatrixXd::Zero(states.rows(), states.stations());
    Mask mask = Mask::Constant(states.rows(), states.stations(), false);
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
        if (!states.mask().row(r).all()) continue;  // incomplete state, no prediction
        Eigen::VectorXd state = states.values().row(r);
        if (params) {
            for (Eigen::Index s = 0; s < state.size(); ++s) {
                state(s) = (state(s) - params->stations[s].mean) / params->stations[s].std;
            }
        }
        Eigen::VectorXd pred = sindy::predict_one_step(model, state);
        if (params) {
            for (Eigen::Index s = 0; s < pred.size(); ++s) {
                pred(s) = pred(s) * params->stations[s].std + params->stations[s].mean;
            }
        }
        values.row(r) = pred.transpose();
        mask.row(r).setConstant(true);
    }
    // Predictions are one step ahead of their source rows.
    const SeriesMatrix out(states.start_hour() + 1, std::move(values), std::move(mask),
                           states.station_ids(), Space::Raw);
    write_file(args.output, write_csv(out));
    std::cout << args.output << "\n";
    return 0;
}

struct ExperimentArgs {
    std::string input;
    std::string config_path;
    std::string outdir = ".";
    std::string train_range, eval_range;
    std::vector<double> levels;
    std::string regime;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::int64_t min_len = -1, max_len = -1;
    std::string lambda;
    int k = -1;
};

int cmd_experiment(const ExperimentArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) {
        cfg = config_from_json(nlohmann::json::parse(read_file(args.config_path)));
    }
    if (!args.train_range.empty()) cfg.train_range = parse_range(args.train_range);
    if (!args.eval_range.empty()) cfg.eval_range = parse_range(args.eval_range);
    if (!args.levels.empty()) cfg.missing_levels = args.levels;
    if (!args.regime.empty()) {
        if (args.regime == "random") {
            cfg.regime = SweepRegime::Random;
        } else if (args.regime == "block") {
            cfg.regime = SweepRegime::Block;
        } else if (args.regime == "mixed") {
            cfg.regime = SweepRegime::Mixed;
        } else {
            throw UsageError("--regime must be random, block, or mixed");
        }
    }
    if (args.seed_given) cfg.seed = args.seed;
    if (args.min_len >= 0) cfg.block_min_len = args.min_len;
    if (args.max_len >= 0) cfg.block_max_len = args.max_len;
    if (args.k > 0) cfg.knn.k = args.k;
    if (!args.lambda.empty()) {
        if (args.lambda == "auto") {
            cfg.lambda_auto = true;
        } else {
            cfg.lambda_auto = false;
            cfg.si.lambda = parse_lambda_flag(args.lambda);
        }
    }

    const SeriesMatrix data = parse_csv(read_file(args.input));
    const ExperimentReport report = run_experiment(data, cfg);

    fs::create_directories(args.outdir);
    const std::string json_path = (fs::path(args.outdir) / "report.json").string();
    const std::string csv_path = (fs::path(args.outdir) / "report.csv").string();
    write_file(json_path, emit_report(report, ReportFormat::Json));
    write_file(csv_path, emit_report(report, ReportFormat::Csv));
    std::cout << json_path << "\n" << csv_path << "\n";

    for (const auto& li : report.injections) {
        for (const auto& record : li.records) {
            const char* kind =
                std::holds_alternative<RandomRegime>(record.regime) ? "random" : "block";
            const std::string path =
                (fs::path(args.outdir) /
                 ("injection_" + format_double(li.level) + "_" + kind + ".json"))
                    .string();
            write_file(path, record_to_json(record).dump() + "\n");
            std::cout << path << "\n";
        }
    }

    std::cerr << "lambda=" << format_double(report.lambda)
              << (report.lambda_selected ? " (selected)" : " (fixed)") << "\n";
    for (const auto& r : report.results) {
        std::cerr << r.method << " @ " << format_double(r.level) << ": ";
        if (r.failed) {
            std::cerr << "FAILED " << r.error << "\n";
        } else {
            std::cerr << "IOA " << format_double(r.pooled_ioa) << " RMSE "
                      << format_double(r.pooled_rmse) << " cells " << r.n_cells << "\n";
        }
    }
    return 0;
}

int cmd_report(const std::string& input, const std::string& format,
               const std::string& output) {
    const auto j = nlohmann::ordered_json::parse(read_file(input));
    std::string bytes;
    if (format == "json") {
        bytes = j.dump(2) + "\n";
    } else if (format == "csv") {
        bytes = "method,level,scope,ioa,rmse,n_cells\n";
        for (const auto& r : j.at("results")) {
            const std::string method = r.at("method").get<std::string>();
            const std::string level = format_double(r.at("level").get<double>());
            const bool failed = r.at("status").get<std::string>() == "failed";
            bytes += method + ',' + level + ",pooled,";
            if (failed) {
                bytes += ",,0\n";
                continue;
            }
            const auto& pooled = r.at("pooled");
            bytes += format_double(pooled.at("ioa").get<double>()) + ',' +
                     format_double(pooled.at("rmse").get<double>()) + ',' +
                     std::to_string(pooled.at("n_cells").get<long long>()) + '\n';
            for (const auto& s : r.at("stations")) {
                bytes += method + ',' + level + ',' + s.at("id").get<std::string>() + ',';
                if (!s.at("ioa").is_null()) bytes += format_double(s.at("ioa").get<double>());
                bytes += ',';
                if (!s.at("rmse").is_null()) {
                    bytes += format_double(s.at("rmse").get<double>());
                }
                bytes += ',' + std::to_string(s.at("n_cells").get<long long>()) + '\n';
            }
        }
    } else {
        throw UsageError("--format must be json or csv");
    }
    write_file(output, bytes);
    std::cout << output << "\n";
    return 0;
}

int cmd_ingest(const std::string& input, const std::string& output) {
    const SeriesMatrix m = parse_csv(read_file(input));
    std::cerr << "rows=" << m.rows() << " stations=" << m.stations() << " span=["
              << format_timestamp(m.span().begin) << ", " << format_timestamp(m.span().end)
              << ") observed=" << format_double(observed_fraction(m)) << "\n";
    if (output.empty()) {
        std::cout << write_csv(m);
    } else {
        write_file(output, write_csv(m));
        std::cout << output << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gap imputation and evaluation for hourly station series"};
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "parse a CSV and re-emit it canonically");
    std::string ingest_in, ingest_out;
    ingest->add_option("input", ingest_in, "input CSV")->required();
    ingest->add_option("-o,--output", ingest_out, "output CSV (default stdout)");

    auto* inject = app.add_subcommand("inject", "mask observed cells deterministically");
    InjectArgs inject_args;
    inject->add_option("input", inject_args.input, "input CSV")->required();
    inject->add_option("-o,--output", inject_args.output, "masked CSV")->required();
    inject->add_option("--record", inject_args.record_path,
                       "injection record JSON (default <output>.record.json)");
    inject->add_option("--fraction", inject_args.fraction, "fraction of observed cells")
        ->required();
    inject->add_option("--regime", inject_args.regime, "random or block");
    inject->add_option("--min-len", inject_args.min_len, "min block length (hours)");
    inject->add_option("--max-len", inject_args.max_len, "max block length (hours)");
    inject->add_option("--seed", inject_args.seed, "seed")->envname("GAPDYN_SEED");

    auto* impute = app.add_subcommand("impute", "fill missing cells");
    ImputeArgs impute_args;
    impute->add_option("input", impute_args.input, "input CSV")->required();
    impute->add_option("-o,--output", impute_args.output, "completed CSV")->required();
    impute->add_option("--method", impute_args.method, "si | knn | si-sindy | knn-sindy")
        ->required();
    impute->add_option("--lambda", impute_args.lambda, "shrinkage, or 'auto'");
    impute->add_option("--k", impute_args.k, "neighbor count");
    impute->add_option("--model", impute_args.model_path, "model JSON from `sindy fit`");
    impute->add_option("--train-range", impute_args.train_range,
                       "BEGIN/END range for normalization and on-the-fly model fitting");
    impute->add_option("--seed", impute_args.seed, "seed for lambda selection")
        ->envname("GAPDYN_SEED");
    impute->add_option("--degree", impute_args.degree, "library degree (hybrid fit)");
    impute->add_option("--threshold", impute_args.threshold, "stlsq threshold (hybrid fit)");
    impute->add_option("--ridge", impute_args.ridge, "stlsq ridge (hybrid fit)");

    auto* sindy_cmd = app.add_subcommand("sindy", "dynamics model commands");
    sindy_cmd->require_subcommand(1);
    auto* fit = sindy_cmd->add_subcommand("fit", "fit a model on a clean period");
    SindyFitArgs fit_args;
    fit->add_option("input", fit_args.input, "training CSV")->required();
    fit->add_option("-o,--output", fit_args.output, "model JSON")->required();
    fit->add_option("--train-range", fit_args.train_range, "BEGIN/END (default: whole file)");
    fit->add_option("--degree", fit_args.degree, "polynomial degree");
    fit->add_flag("--no-constant", fit_args.no_constant, "drop the constant term");
    fit->add_option("--threshold", fit_args.threshold, "stlsq threshold");
    fit->add_option("--ridge", fit_args.ridge, "stlsq ridge");
    fit->add_option("--max-rounds", fit_args.max_rounds, "stlsq rounds");

    auto* predict = sindy_cmd->add_subcommand("predict", "one-step predictions");
    SindyPredictArgs predict_args;
    predict->add_option("input", predict_args.input, "state CSV")->required();
    predict->add_option("--model", predict_args.model_path, "model JSON")->required();
    predict->add_option("-o,--output", predict_args.output, "prediction CSV")->required();

    auto* experiment = app.add_subcommand("experiment", "run the full method comparison");
    ExperimentArgs exp_args;
    experiment->add_option("input", exp_args.input, "data CSV spanning both ranges")
        ->required();
    experiment->add_option("--config", exp_args.config_path, "config JSON");
    experiment->add_option("-O,--outdir", exp_args.outdir, "output directory");
    experiment->add_option("--train-range", exp_args.train_range, "BEGIN/END");
    experiment->add_option("--eval-range", exp_args.eval_range, "BEGIN/END");
    experiment->add_option("--levels", exp_args.levels, "missing levels")->delimiter(',');
    experiment->add_option("--regime", exp_args.regime, "random | block | mixed");
    auto* seed_opt =
        experiment->add_option("--seed", exp_args.seed, "sweep seed")->envname("GAPDYN_SEED");
    experiment->add_option("--min-len", exp_args.min_len, "block min length");
    experiment->add_option("--max-len", exp_args.max_len, "block max length");
    experiment->add_option("--lambda", exp_args.lambda, "shrinkage, or 'auto'");
    experiment->add_option("--k", exp_args.k, "neighbor count");

    auto* report = app.add_subcommand("report", "re-emit a report.json");
    std::string report_in, report_format = "csv", report_out;
    report->add_option("input", report_in, "report.json")->required();
    report->add_option("--format", report_format, "csv or json");
    report->add_option("-o,--output", report_out, "output path")->required();

    try {
        app.parse(argc, argv);
        if (ingest->parsed()) return cmd_ingest(ingest_in, ingest_out);
        if (inject->parsed()) return cmd_inject(inject_args);
        if (impute->parsed()) return cmd_impute(impute_args);
        if (sindy_cmd->parsed()) {
            if (fit->parsed()) return cmd_sindy_fit(fit_args);
            if (predict->parsed()) return cmd_sindy_predict(predict_args);
        }
        if (experiment->parsed()) {
            exp_args.seed_given = seed_opt->count() > 0;
            return cmd_experiment(exp_args);
        }
        if (report->parsed()) return cmd_report(report_in, report_format, report_out);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: Usage: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: Usage: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
