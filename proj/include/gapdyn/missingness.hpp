#pragma once

#include "gapdyn/series.hpp"

#include <json.hpp>

#include <cstdint>
#include <variant>
#include <vector>

namespace gapdyn {

struct RandomRegime {
    double fraction = 0.0;
};

struct BlockRegime {
    double fraction = 0.0;
    std::int64_t min_len = 6;
    std::int64_t max_len = 72;
};

using InjectionRegime = std::variant<RandomRegime, BlockRegime>;

/// Which cells an injection masked, with everything needed to replay it.
/// Cells are sorted row-major and never intersect originally-missing cells,
/// so the pre-injection value of every listed cell is recoverable from the
/// original matrix.
struct InjectionRecord {
    std::uint64_t seed = 0;
    InjectionRegime regime;
    std::vector<Cell> cells;
};

struct Injection {
    SeriesMatrix masked;
    InjectionRecord record;
};

/// Masks exactly round(fraction * observed-count) observed cells, chosen
/// uniformly without replacement by a seeded deterministic generator.
Injection inject_random(const SeriesMatrix& m, double fraction, std::uint64_t seed);

/// Masks per-station contiguous runs with lengths drawn uniformly from
/// [min_len, max_len] until exactly round(fraction * observed-count) cells
/// are hit; the final run is truncated to land on the target. Throws
/// Unsatisfiable when the target exceeds the observed count.
Injection inject_blocks(const SeriesMatrix& m, double fraction, std::int64_t min_len,
                        std::int64_t max_len, std::uint64_t seed);

/// Count-based variants; the fraction forms above reduce to these. Useful
/// when composing regimes under one exact cell budget.
Injection inject_random_count(const SeriesMatrix& m, Eigen::Index count, std::uint64_t seed);
Injection inject_blocks_count(const SeriesMatrix& m, Eigen::Index count, std::int64_t min_len,
                              std::int64_t max_len, std::uint64_t seed);

nlohmann::ordered_json record_to_json(const InjectionRecord& record);
InjectionRecord record_from_json(const nlohmann::json& j);

} // namespace gapdyn
