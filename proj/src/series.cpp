#include "gapdyn/series.hpp"

#include "gapdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

namespace gapdyn {

SeriesMatrix::SeriesMatrix(std::int64_t start_hour,
                           Eigen::MatrixXd values,
                           Mask mask,
                           std::vector<std::string> station_ids,
                           Space space)
    : start_hour_(start_hour),
      values_(std::move(values)),
      mask_(std::move(mask)),
      station_ids_(std::move(station_ids)),
      space_(space) {
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw ShapeMismatch("series matrix must have at least one row and one station");
    }
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols()) {
        throw ShapeMismatch("mask shape does not match values shape");
    }
    if (static_cast<Eigen::Index>(station_ids_.size()) != values_.cols()) {
        throw ShapeMismatch("station id count does not match column count");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : station_ids_) {
        if (id.empty()) throw InvalidConfig("station id must be non-empty");
        if (!seen.insert(id).second) throw InvalidConfig("duplicate station id: " + id);
    }
    // Canonicalize: masked cells carry the NaN sentinel, observed cells must
    // already be finite.
    for (Eigen::Index s = 0; s < values_.cols(); ++s) {
        for (Eigen::Index r = 0; r < values_.rows(); ++r) {
            if (mask_(r, s)) {
                if (!std::isfinite(values_(r, s))) {
                    throw InvalidConfig("observed cell holds a non-finite value at row " +
                                        std::to_string(r) + ", station " + std::to_string(s));
                }
            } else {
                values_(r, s) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
}

double observed_fraction(const SeriesMatrix& m) {
    return static_cast<double>(m.observed_count()) /
           static_cast<double>(m.rows() * m.stations());
}

SeriesMatrix restrict_hours(const SeriesMatrix& m, HourRange range) {
    const std::int64_t lo = std::max(range.begin, m.start_hour());
    const std::int64_t hi = std::min(range.end, m.start_hour() + m.rows());
    if (lo >= hi) {
        throw EmptyRange("no row falls inside [" + std::to_string(range.begin) + ", " +
                         std::to_string(range.end) + ")");
    }
    const Eigen::Index first = lo - m.start_hour();
    const Eigen::Index count = hi - lo;
    return SeriesMatrix(lo,
                        m.values().middleRows(first, count),
                        m.mask().middleRows(first, count),
                        m.station_ids(),
                        m.space());
}

} // namespace gapdyn
