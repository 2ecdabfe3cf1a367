#include "gapdyn/sindy.hpp"

#include "gapdyn/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <numeric>

namespace gapdyn::sindy {

namespace {

void check_spec(Eigen::Index stations, const LibrarySpec& spec) {
    if (stations < 1) throw ShapeMismatch("library needs at least one station");
    if (spec.degree < 1) throw InvalidConfig("library degree must be >= 1");
}

// Single ridge least-squares solve on the active columns.
Eigen::VectorXd solve_active(const Eigen::MatrixXd& theta_active, const Eigen::VectorXd& y,
                             double ridge) {
    const Eigen::Index a = theta_active.cols();
    if (ridge > 0.0) {
        Eigen::MatrixXd normal = theta_active.transpose() * theta_active;
        normal.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(normal);
        if (llt.info() != Eigen::Success) {
            throw RankDeficient("active-set normal system is singular despite ridge > 0");
        }
        return llt.solve(theta_active.transpose() * y);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(theta_active);
    if (qr.rank() < a) {
        throw RankDeficient("active-set system is rank deficient and ridge is 0");
    }
    return qr.solve(y);
}

} // namespace

Eigen::Index library_size(Eigen::Index stations, const LibrarySpec& spec) {
    check_spec(stations, spec);
    // C(S + degree, degree), computed without overflow at these scales.
    Eigen::Index size = 1;
    for (int i = 1; i <= spec.degree; ++i) {
        size = size * (stations + i) / i;
    }
    return spec.include_constant ? size : size - 1;
}

std::vector<std::vector<Eigen::Index>> library_terms(Eigen::Index stations,
                                                     const LibrarySpec& spec) {
    check_spec(stations, spec);
    std::vector<std::vector<Eigen::Index>> terms;
    if (spec.include_constant) terms.push_back({});
    std::vector<Eigen::Index> tuple;
    // Non-decreasing index tuples of length d, emitted in lexicographic order.
    auto emit = [&](auto&& self, Eigen::Index from, int remaining) -> void {
        if (remaining == 0) {
            terms.push_back(tuple);
            return;
        }
        for (Eigen::Index i = from; i < stations; ++i) {
            tuple.push_back(i);
            self(self, i, remaining - 1);
            tuple.pop_back();
        }
    };
    for (int d = 1; d <= spec.degree; ++d) emit(emit, 0, d);
    return terms;
}

Eigen::MatrixXd build_library(const Eigen::MatrixXd& states, const LibrarySpec& spec) {
    if (!states.allFinite()) {
        throw InvalidConfig("build_library requires a complete state matrix");
    }
    const auto terms = library_terms(states.cols(), spec);
    Eigen::MatrixXd theta(states.rows(), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t j = 0; j < terms.size(); ++j) {
        Eigen::VectorXd col = Eigen::VectorXd::Ones(states.rows());
        for (const Eigen::Index idx : terms[j]) {
            col.array() *= states.col(idx).array();
        }
        theta.col(static_cast<Eigen::Index>(j)) = col;
    }
    return theta;
}

Eigen::MatrixXd stlsq(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets,
                      double threshold, double ridge, int max_rounds) {
    if (theta.rows() != targets.rows()) {
        throw ShapeMismatch("theta and targets disagree on sample count");
    }
    if (!(threshold >= 0.0) || !(ridge >= 0.0) || max_rounds < 1) {
        throw InvalidConfig("stlsq requires threshold >= 0, ridge >= 0, max_rounds >= 1");
    }
    const Eigen::Index n_terms = theta.cols();
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n_terms, targets.cols());

    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        std::vector<Eigen::Index> active(n_terms);
        std::iota(active.begin(), active.end(), 0);
        Eigen::VectorXd coef;
        for (int round = 0; round < max_rounds && !active.empty(); ++round) {
            Eigen::MatrixXd theta_active(theta.rows(),
                                         static_cast<Eigen::Index>(active.size()));
            for (std::size_t i = 0; i < active.size(); ++i) {
                theta_active.col(static_cast<Eigen::Index>(i)) = theta.col(active[i]);
            }
            coef = solve_active(theta_active, targets.col(j), ridge);
            std::vector<Eigen::Index> survivors;
            for (std::size_t i = 0; i < active.size(); ++i) {
                if (std::abs(coef(static_cast<Eigen::Index>(i))) >= threshold) {
                    survivors.push_back(active[i]);
                }
            }
            if (survivors.size() == active.size()) break;  // support stable
            // Support only ever shrinks, so this settles within n_terms rounds.
            active = std::move(survivors);
            coef.resize(0);
        }
        if (coef.size() > 0) {
            for (std::size_t i = 0; i < active.size(); ++i) {
                const double c = coef(static_cast<Eigen::Index>(i));
                if (std::abs(c) >= threshold) xi(active[i], j) = c;
            }
        } else if (!active.empty()) {
            // max_rounds exhausted right after a support change: one last fit.
            Eigen::MatrixXd theta_active(theta.rows(),
                                         static_cast<Eigen::Index>(active.size()));
            for (std::size_t i = 0; i < active.size(); ++i) {
                theta_active.col(static_cast<Eigen::Index>(i)) = theta.col(active[i]);
            }
            coef = solve_active(theta_active, targets.col(j), ridge);
            for (std::size_t i = 0; i < active.size(); ++i) {
                const double c = coef(static_cast<Eigen::Index>(i));
                if (std::abs(c) >= threshold) xi(active[i], j) = c;
            }
        }
    }
    return xi;
}

SindyModel fit(const SeriesMatrix& train, const LibrarySpec& spec, double threshold,
               double ridge, int max_rounds) {
    if (train.space() != Space::Normalized) {
        throw SpaceMismatch("sindy fit expects a Normalized-space matrix");
    }
    const Eigen::Index n_stations = train.stations();
    const Eigen::Index n_terms = library_size(n_stations, spec);

    // Sample pairs (x_t, x_{t+1}) need both rows fully observed.
    std::vector<Eigen::Index> starts;
    for (Eigen::Index r = 0; r + 1 < train.rows(); ++r) {
        if (train.mask().row(r).all() && train.mask().row(r + 1).all()) {
            starts.push_back(r);
        }
    }
    if (static_cast<Eigen::Index>(starts.size()) < n_terms) {
        throw InsufficientPairs("need at least " + std::to_string(n_terms) +
                                " fully observed consecutive pairs, found " +
                                std::to_string(starts.size()));
    }

    Eigen::MatrixXd states(static_cast<Eigen::Index>(starts.size()), n_stations);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(starts.size()), n_stations);
    for (std::size_t i = 0; i < starts.size(); ++i) {
        states.row(static_cast<Eigen::Index>(i)) = train.values().row(starts[i]);
        targets.row(static_cast<Eigen::Index>(i)) = train.values().row(starts[i] + 1);
    }

    SindyModel model;
    model.station_ids = train.station_ids();
    model.library = spec;
    model.threshold = threshold;
    model.ridge = ridge;
    const Eigen::MatrixXd theta = build_library(states, spec);
    model.xi = stlsq(theta, targets, threshold, ridge, max_rounds);

    model.diagnostics.pairs_used = static_cast<Eigen::Index>(starts.size());
    const Eigen::MatrixXd residual = theta * model.xi - targets;
    for (Eigen::Index s = 0; s < n_stations; ++s) {
        model.diagnostics.train_rmse.push_back(
            std::sqrt(residual.col(s).squaredNorm() / static_cast<double>(residual.rows())));
        model.diagnostics.nonzero_counts.push_back(
            (model.xi.col(s).array() != 0.0).count());
    }
    return model;
}

Eigen::VectorXd predict_one_step(const SindyModel& model, const Eigen::VectorXd& state) {
    if (state.size() != static_cast<Eigen::Index>(model.station_ids.size())) {
        throw ShapeMismatch("state width does not match the model station count");
    }
    if (!state.allFinite()) throw InvalidConfig("state must be complete");
    const Eigen::MatrixXd theta = build_library(state.transpose(), model.library);
    return (theta * model.xi).transpose();
}

SeriesMatrix refine_imputation(const SindyModel& model, const SeriesMatrix& imputed,
                               const std::vector<Cell>& missing_cells, int passes) {
    if (static_cast<Eigen::Index>(model.station_ids.size()) != imputed.stations()) {
        throw ShapeMismatch("model station count does not match the matrix");
    }
    if (imputed.space() != Space::Normalized) {
        throw SpaceMismatch("refine_imputation expects a Normalized-space matrix");
    }
    if (!imputed.fully_observed()) {
        throw InvalidConfig("refine_imputation expects a fully filled matrix");
    }
    if (passes < 1) throw InvalidConfig("passes must be >= 1");

    Mask missing = Mask::Constant(imputed.rows(), imputed.stations(), false);
    for (const Cell& c : missing_cells) {
        if (c.row < 0 || c.row >= imputed.rows() || c.station < 0 ||
            c.station >= imputed.stations()) {
            throw InvalidConfig("missing cell out of range");
        }
        missing(c.row, c.station) = true;
    }

    const auto terms = library_terms(imputed.stations(), model.library);
    Eigen::MatrixXd values = imputed.values();
    Eigen::RowVectorXd lib(static_cast<Eigen::Index>(terms.size()));
    for (int pass = 0; pass < passes; ++pass) {
        // Predictions read the pass input, so within a pass every overwrite is
        // anchored on the imputer's rows (or the previous pass's output).
        const Eigen::MatrixXd source = values;
        for (Eigen::Index t = 1; t < values.rows(); ++t) {
            if (!missing.row(t).any()) continue;
            for (std::size_t j = 0; j < terms.size(); ++j) {
                double v = 1.0;
                for (const Eigen::Index idx : terms[j]) v *= source(t - 1, idx);
                lib(static_cast<Eigen::Index>(j)) = v;
            }
            const Eigen::RowVectorXd pred = lib * model.xi;
            for (Eigen::Index s = 0; s < values.cols(); ++s) {
                if (missing(t, s)) values(t, s) = pred(s);
            }
        }
    }
    return SeriesMatrix(imputed.start_hour(), std::move(values), imputed.mask(),
                        imputed.station_ids(), imputed.space());
}

nlohmann::ordered_json model_to_json(const SindyModel& model) {
    nlohmann::ordered_json j;
    j["stations"] = model.station_ids;
    j["degree"] = model.library.degree;
    j["include_constant"] = model.library.include_constant;
    j["threshold"] = model.threshold;
    j["ridge"] = model.ridge;
    nlohmann::ordered_json xi = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < model.xi.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.xi.cols(); ++c) {
            xi.push_back(model.xi(r, c));
        }
    }
    j["xi"] = std::move(xi);
    j["diagnostics"] = {{"train_rmse", model.diagnostics.train_rmse},
                        {"nonzero_counts", model.diagnostics.nonzero_counts},
                        {"pairs_used", model.diagnostics.pairs_used}};
    return j;
}

SindyModel model_from_json(const nlohmann::json& j) {
    SindyModel model;
    model.station_ids = j.at("stations").get<std::vector<std::string>>();
    model.library.degree = j.at("degree").get<int>();
    model.library.include_constant = j.at("include_constant").get<bool>();
    model.threshold = j.at("threshold").get<double>();
    model.ridge = j.at("ridge").get<double>();
    const Eigen::Index n_stations = static_cast<Eigen::Index>(model.station_ids.size());
    const Eigen::Index n_terms = library_size(n_stations, model.library);
    const auto flat = j.at("xi").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != n_terms * n_stations) {
        throw ShapeMismatch("xi length does not match the library layout");
    }
    model.xi.resize(n_terms, n_stations);
    for (Eigen::Index r = 0; r < n_terms; ++r) {
        for (Eigen::Index c = 0; c < n_stations; ++c) {
            model.xi(r, c) = flat[static_cast<std::size_t>(r * n_stations + c)];
        }
    }
    if (j.contains("diagnostics")) {
        const auto& d = j["diagnostics"];
        model.diagnostics.train_rmse = d.value("train_rmse", std::vector<double>{});
        model.diagnostics.nonzero_counts =
            d.value("nonzero_counts", std::vector<Eigen::Index>{});
        model.diagnostics.pairs_used = d.value("pairs_used", Eigen::Index{0});
    }
    return model;
}

} // namespace gapdyn::sindy
