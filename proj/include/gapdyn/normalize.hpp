#pragma once

#include "gapdyn/series.hpp"

#include <json.hpp>

#include <vector>

namespace gapdyn {

struct StationNorm {
    double mean = 0.0;
    double std = 1.0;
};

/// Per-station z-score parameters, fitted over observed cells only.
/// Entry order matches the station order of the matrix they were fitted on.
struct NormParams {
    std::vector<StationNorm> stations;
    std::vector<std::string> station_ids;
    HourRange fitted_range;
};

/// Mean and sample standard deviation (n-1 divisor) per station over observed
/// cells. Throws DegenerateStation for a station with fewer than two observed
/// values or with all observed values equal.
NormParams fit_normalization(const SeriesMatrix& m);

/// (x - mean) / std per station; Raw -> Normalized. Masked cells stay masked.
SeriesMatrix normalize(const SeriesMatrix& m, const NormParams& p);

/// x * std + mean per station; Normalized -> Raw.
SeriesMatrix denormalize(const SeriesMatrix& m, const NormParams& p);

nlohmann::ordered_json norm_to_json(const NormParams& p);
NormParams norm_from_json(const nlohmann::json& j);

} // namespace gapdyn
