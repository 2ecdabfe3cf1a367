#include "gapdyn/csv.hpp"

#include "gapdyn/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>
#include <vector>

namespace gapdyn {

namespace {

// Civil-calendar day math (proleptic Gregorian), days since 1970-01-01.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr std::array<unsigned, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                         31, 31, 30, 31, 30, 31};
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29 : 28;
    }
    return lengths[m - 1];
}

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return !s.empty();
}

unsigned to_uint(std::string_view s) {
    unsigned v = 0;
    for (char c : s) v = v * 10 + static_cast<unsigned>(c - '0');
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
}

bool is_missing_token(std::string_view token) {
    return token.empty() || token == "NA" || token == "NaN" || token == "-999";
}

double parse_value(std::string_view token, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
        throw BadNumber("line " + std::to_string(line_no) + ": unparseable value '" +
                        std::string(token) + "'");
    }
    return v;
}

} // namespace

std::int64_t parse_timestamp(std::string_view token) {
    // Strict YYYY-MM-DDTHH:00 (years may exceed four digits).
    const auto fail = [&] {
        throw BadNumber("malformed timestamp '" + std::string(token) +
                        "', expected YYYY-MM-DDTHH:00");
    };
    if (token.size() < 16) fail();
    const std::size_t ylen = token.size() - 12;
    const std::string_view ys = token.substr(0, ylen);
    if (ylen < 4 || !all_digits(ys)) fail();
    if (token[ylen] != '-' || token[ylen + 3] != '-' || token[ylen + 6] != 'T' ||
        token.substr(ylen + 9) != ":00") {
        fail();
    }
    const std::string_view ms = token.substr(ylen + 1, 2);
    const std::string_view ds = token.substr(ylen + 4, 2);
    const std::string_view hs = token.substr(ylen + 7, 2);
    if (!all_digits(ms) || !all_digits(ds) || !all_digits(hs)) fail();

    const std::int64_t year = static_cast<std::int64_t>(to_uint(ys));
    const unsigned month = to_uint(ms);
    const unsigned day = to_uint(ds);
    const unsigned hour = to_uint(hs);
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) || hour > 23) {
        fail();
    }
    return days_from_civil(year, month, day) * 24 + hour;
}

std::string format_timestamp(std::int64_t epoch_hour) {
    std::int64_t days = epoch_hour / 24;
    std::int64_t hour = epoch_hour % 24;
    if (hour < 0) {
        hour += 24;
        days -= 1;
    }
    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:00",
                  static_cast<long long>(y), m, d, static_cast<long long>(hour));
    return buf;
}

SeriesMatrix parse_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    {
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t next = text.find('\n', pos);
            if (next == std::string_view::npos) next = text.size();
            std::string_view line = text.substr(pos, next - pos);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.push_back(line);
            pos = next + 1;
        }
        while (!lines.empty() && lines.back().empty()) lines.pop_back();
    }
    if (lines.empty()) throw BadHeader("empty input");

    const auto header = split(lines[0], ',');
    if (header.size() < 2 || header[0] != "timestamp") {
        throw BadHeader("header must be 'timestamp,<station>,...', got '" +
                        std::string(lines[0]) + "'");
    }
    std::vector<std::string> station_ids;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < header.size(); ++i) {
        std::string id(header[i]);
        if (id.empty()) throw BadHeader("empty station name in header");
        if (!seen.insert(id).second) throw BadHeader("duplicate station name '" + id + "'");
        station_ids.push_back(std::move(id));
    }
    const std::size_t n_stations = station_ids.size();

    std::vector<std::int64_t> hours;
    std::vector<std::vector<double>> row_values;
    std::vector<std::vector<bool>> row_mask;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto fields = split(lines[i], ',');
        if (fields.size() != n_stations + 1) {
            throw BadNumber("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_stations + 1) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::int64_t hour = parse_timestamp(fields[0]);
        if (!hours.empty() && hour <= hours.back()) {
            throw NonMonotonicTime("line " + std::to_string(line_no) + ": timestamp " +
                                   std::string(fields[0]) + " does not increase");
        }
        hours.push_back(hour);
        std::vector<double> vals(n_stations, std::numeric_limits<double>::quiet_NaN());
        std::vector<bool> obs(n_stations, false);
        for (std::size_t s = 0; s < n_stations; ++s) {
            const std::string_view token = fields[s + 1];
            if (is_missing_token(token)) continue;
            vals[s] = parse_value(token, line_no);
            obs[s] = true;
        }
        row_values.push_back(std::move(vals));
        row_mask.push_back(std::move(obs));
    }
    if (hours.empty()) throw BadHeader("file contains no data rows");

    // Restore hourly cadence: absent hours inside the span become masked rows.
    const std::int64_t start = hours.front();
    const Eigen::Index total = hours.back() - start + 1;
    Eigen::MatrixXd values =
        Eigen::MatrixXd::Constant(total, n_stations, std::numeric_limits<double>::quiet_NaN());
    Mask mask = Mask::Constant(total, n_stations, false);
    for (std::size_t i = 0; i < hours.size(); ++i) {
        const Eigen::Index r = hours[i] - start;
        for (std::size_t s = 0; s < n_stations; ++s) {
            values(r, s) = row_values[i][s];
            mask(r, s) = row_mask[i][s];
        }
    }
    return SeriesMatrix(start, std::move(values), std::move(mask), std::move(station_ids),
                        Space::Raw);
}

std::string write_csv(const SeriesMatrix& m) {
    std::string out = "timestamp";
    for (const auto& id : m.station_ids()) {
        out += ',';
        out += id;
    }
    out += '\n';
    char buf[64];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out += format_timestamp(m.hour_at(r));
        for (Eigen::Index s = 0; s < m.stations(); ++s) {
            out += ',';
            if (!m.is_observed(r, s)) continue;
            const auto res = std::to_chars(buf, buf + sizeof(buf), m.values()(r, s),
                                           std::chars_format::general, 6);
            out.append(buf, res.ptr);
        }
        out += '\n';
    }
    return out;
}

} // namespace gapdyn
