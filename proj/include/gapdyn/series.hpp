#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace gapdyn {

/// Value space of a series matrix. Raw holds µg/m³ readings; Normalized holds
/// per-station z-scores. Operations that care check the flag and throw
/// SpaceMismatch instead of silently mixing scales.
enum class Space { Raw, Normalized };

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Half-open range of epoch hours [begin, end).
struct HourRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;

    std::int64_t length() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(std::int64_t hour) const { return hour >= begin && hour < end; }
    bool operator==(const HourRange&) const = default;
};

/// One (row, station) position of a series matrix.
struct Cell {
    Eigen::Index row = 0;
    Eigen::Index station = 0;

    auto operator<=>(const Cell&) const = default;
};

/// T×S hourly multivariate series with an observation mask.
///
/// Invariants, enforced at construction and never broken afterwards:
///  - values and mask share the exact T×S shape, T ≥ 1, S ≥ 1;
///  - row r corresponds to epoch hour start_hour() + r, so the timestamp
///    sequence is strictly increasing with a constant one-hour step (coverage
///    gaps are represented as masked rows, never as absent rows);
///  - every masked cell holds quiet NaN and is never read numerically; the
///    mask, not the sentinel, is authoritative;
///  - every observed cell is finite;
///  - station ids are unique, non-empty, and order-stable.
///
/// Instances are immutable; all operations return new values, so sharing
/// across threads is safe.
class SeriesMatrix {
public:
    SeriesMatrix(std::int64_t start_hour,
                 Eigen::MatrixXd values,
                 Mask mask,
                 std::vector<std::string> station_ids,
                 Space space);

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index stations() const { return values_.cols(); }

    std::int64_t start_hour() const { return start_hour_; }
    std::int64_t hour_at(Eigen::Index row) const { return start_hour_ + row; }
    HourRange span() const { return {start_hour_, start_hour_ + rows()}; }

    const Eigen::MatrixXd& values() const { return values_; }
    const Mask& mask() const { return mask_; }
    const std::vector<std::string>& station_ids() const { return station_ids_; }
    Space space() const { return space_; }

    bool is_observed(Eigen::Index row, Eigen::Index station) const {
        return mask_(row, station);
    }
    Eigen::Index observed_count() const { return mask_.count(); }
    bool fully_observed() const { return observed_count() == rows() * stations(); }

private:
    std::int64_t start_hour_;
    Eigen::MatrixXd values_;
    Mask mask_;
    std::vector<std::string> station_ids_;
    Space space_;
};

/// Fraction of cells observed, in [0, 1].
double observed_fraction(const SeriesMatrix& m);

/// Sub-matrix of rows whose hours fall in `range`; stations unchanged.
/// Throws EmptyRange when no row falls inside the range.
SeriesMatrix restrict_hours(const SeriesMatrix& m, HourRange range);

} // namespace gapdyn
