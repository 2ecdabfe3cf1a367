#include "gapdyn/normalize.hpp"

#include "gapdyn/errors.hpp"

#include <cmath>

namespace gapdyn {

namespace {

void check_coverage(const SeriesMatrix& m, const NormParams& p) {
    if (p.station_ids != m.station_ids()) {
        throw ShapeMismatch("normalization params do not cover the matrix stations");
    }
}

} // namespace

NormParams fit_normalization(const SeriesMatrix& m) {
    NormParams p;
    p.station_ids = m.station_ids();
    p.fitted_range = m.span();
    p.stations.reserve(m.stations());
    for (Eigen::Index s = 0; s < m.stations(); ++s) {
        double sum = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        Eigen::Index n = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (!m.is_observed(r, s)) continue;
            const double v = m.values()(r, s);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++n;
        }
        if (n < 2 || lo == hi) {
            throw DegenerateStation("station '" + m.station_ids()[s] +
                                    "' has fewer than two distinct observed values");
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (!m.is_observed(r, s)) continue;
            const double d = m.values()(r, s) - mean;
            ss += d * d;
        }
        p.stations.push_back({mean, std::sqrt(ss / static_cast<double>(n - 1))});
    }
    return p;
}

SeriesMatrix normalize(const SeriesMatrix& m, const NormParams& p) {
    if (m.space() != Space::Raw) throw SpaceMismatch("normalize expects a Raw-space matrix");
    check_coverage(m, p);
    Eigen::MatrixXd values = m.values();
    for (Eigen::Index s = 0; s < m.stations(); ++s) {
        values.col(s) = (values.col(s).array() - p.stations[s].mean) / p.stations[s].std;
    }
    return SeriesMatrix(m.start_hour(), std::move(values), m.mask(), m.station_ids(),
                        Space::Normalized);
}

SeriesMatrix denormalize(const SeriesMatrix& m, const NormParams& p) {
    if (m.space() != Space::Normalized) {
        throw SpaceMismatch("denormalize expects a Normalized-space matrix");
    }
    check_coverage(m, p);
    Eigen::MatrixXd values = m.values();
    for (Eigen::Index s = 0; s < m.stations(); ++s) {
        values.col(s) = values.col(s).array() * p.stations[s].std + p.stations[s].mean;
    }
    return SeriesMatrix(m.start_hour(), std::move(values), m.mask(), m.station_ids(),
                        Space::Raw);
}

nlohmann::ordered_json norm_to_json(const NormParams& p) {
    nlohmann::ordered_json j;
    j["stations"] = p.station_ids;
    nlohmann::ordered_json means = nlohmann::ordered_json::array();
    nlohmann::ordered_json stds = nlohmann::ordered_json::array();
    for (const auto& s : p.stations) {
        means.push_back(s.mean);
        stds.push_back(s.std);
    }
    j["mean"] = std::move(means);
    j["std"] = std::move(stds);
    j["fitted_range"] = {p.fitted_range.begin, p.fitted_range.end};
    return j;
}

NormParams norm_from_json(const nlohmann::json& j) {
    NormParams p;
    p.station_ids = j.at("stations").get<std::vector<std::string>>();
    const auto means = j.at("mean").get<std::vector<double>>();
    const auto stds = j.at("std").get<std::vector<double>>();
    if (means.size() != p.station_ids.size() || stds.size() != p.station_ids.size()) {
        throw ShapeMismatch("normalization params arrays disagree on station count");
    }
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (!(stds[i] > 0.0)) throw DegenerateStation("non-positive std in params");
        p.stations.push_back({means[i], stds[i]});
    }
    if (j.contains("fitted_range")) {
        p.fitted_range = {j["fitted_range"].at(0).get<std::int64_t>(),
                          j["fitted_range"].at(1).get<std::int64_t>()};
    }
    return p;
}

} // namespace gapdyn
