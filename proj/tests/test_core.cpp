#include <doctest.h>

#include "gapdyn/errors.hpp"
#include "gapdyn/series.hpp"

#include "support/synthetic.hpp"

#include <cmath>
#include <limits>

using namespace gapdyn;
using testsupport::series_from;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_series(const SeriesMatrix& a, const SeriesMatrix& b) {
    if (a.start_hour() != b.start_hour() || a.rows() != b.rows() ||
        a.stations() != b.stations() || a.space() != b.space() ||
        a.station_ids() != b.station_ids()) {
        return false;
    }
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index s = 0; s < a.stations(); ++s) {
            if (a.is_observed(r, s) != b.is_observed(r, s)) return false;
            if (a.is_observed(r, s) && a.values()(r, s) != b.values()(r, s)) return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("observed_fraction counts mask-true cells") {
    Eigen::MatrixXd full(3, 2);
    full << 1, 2, 3, 4, 5, 6;
    CHECK(observed_fraction(series_from(0, full, Space::Raw)) == 1.0);

    Eigen::MatrixXd empty = Eigen::MatrixXd::Constant(3, 2, kNaN);
    CHECK(observed_fraction(series_from(0, empty, Space::Raw)) == 0.0);

    Eigen::MatrixXd column(10, 1);
    for (int i = 0; i < 10; ++i) column(i, 0) = i;
    column(2, 0) = kNaN;
    column(5, 0) = kNaN;
    column(9, 0) = kNaN;
    CHECK(observed_fraction(series_from(0, column, Space::Raw)) == doctest::Approx(0.7));
}

TEST_CASE("restrict_hours slices by epoch-hour range") {
    Eigen::MatrixXd values(48, 2);
    for (int r = 0; r < 48; ++r) {
        values(r, 0) = r;
        values(r, 1) = 100 + r;
    }
    const SeriesMatrix m = series_from(1000, values, Space::Raw);

    SUBCASE("full range is the identity") {
        CHECK(same_series(restrict_hours(m, m.span()), m));
    }
    SUBCASE("first 24 hours give 24 rows") {
        const SeriesMatrix day = restrict_hours(m, {1000, 1024});
        CHECK(day.rows() == 24);
        CHECK(day.start_hour() == 1000);
        CHECK(day.values()(23, 0) == 23.0);
    }
    SUBCASE("range outside the span throws EmptyRange") {
        CHECK_THROWS_AS(restrict_hours(m, {5000, 5100}), EmptyRange);
        CHECK_THROWS_AS(restrict_hours(m, {1010, 1010}), EmptyRange);
    }
    SUBCASE("restriction is idempotent") {
        const HourRange r{1005, 1020};
        const SeriesMatrix once = restrict_hours(m, r);
        CHECK(same_series(restrict_hours(once, r), once));
    }
}

TEST_CASE("construction enforces the shape and sentinel invariants") {
    Eigen::MatrixXd values(2, 2);
    values << 1, 2, 3, 4;

    SUBCASE("mask shape must match") {
        CHECK_THROWS_AS(SeriesMatrix(0, values, Mask::Constant(3, 2, true), {"a", "b"},
                                     Space::Raw),
                        ShapeMismatch);
    }
    SUBCASE("station ids must be unique and sized to the columns") {
        CHECK_THROWS_AS(SeriesMatrix(0, values, Mask::Constant(2, 2, true), {"a", "a"},
                                     Space::Raw),
                        InvalidConfig);
        CHECK_THROWS_AS(SeriesMatrix(0, values, Mask::Constant(2, 2, true), {"a"},
                                     Space::Raw),
                        ShapeMismatch);
    }
    SUBCASE("an observed non-finite cell is rejected") {
        Eigen::MatrixXd bad = values;
        bad(0, 1) = kNaN;
        CHECK_THROWS_AS(SeriesMatrix(0, bad, Mask::Constant(2, 2, true), {"a", "b"},
                                     Space::Raw),
                        InvalidConfig);
    }
    SUBCASE("masked cells are canonicalized to NaN regardless of input value") {
        Mask mask = Mask::Constant(2, 2, true);
        mask(1, 0) = false;
        const SeriesMatrix m(0, values, mask, {"a", "b"}, Space::Raw);
        CHECK(std::isnan(m.values()(1, 0)));
        CHECK(m.observed_count() == 3);
    }
}
