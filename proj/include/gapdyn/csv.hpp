#pragma once

#include "gapdyn/series.hpp"

#include <string>
#include <string_view>

namespace gapdyn {

/// Epoch-hour <-> `YYYY-MM-DDTHH:00` conversion. Timestamps are treated as
/// local standard time; no offset arithmetic anywhere. Throws BadNumber on a
/// malformed token.
std::int64_t parse_timestamp(std::string_view token);
std::string format_timestamp(std::int64_t epoch_hour);

/// Parses station CSV text into a Raw-space matrix.
///
/// Format: header `timestamp,<id_1>,...,<id_S>`, one row per hour, values as
/// decimal literals, missing encoded as empty cell / `NA` / `NaN` / `-999`,
/// `\n` newlines, no quoting. Hours absent from the file within the covered
/// span come back as fully masked rows so the hourly cadence is restored.
SeriesMatrix parse_csv(std::string_view text);

/// Inverse of parse_csv: values rendered to 6 significant digits, masked
/// cells as empty fields. parse_csv(write_csv(m)) reproduces m bit-for-bit
/// on the mask and to 6 significant digits on values.
std::string write_csv(const SeriesMatrix& m);

} // namespace gapdyn
