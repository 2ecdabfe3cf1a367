#include "gapdyn/missingness.hpp"

#include "gapdyn/errors.hpp"
#include "gapdyn/rng.hpp"

#include <algorithm>
#include <cmath>

namespace gapdyn {

namespace {

Eigen::Index target_count(const SeriesMatrix& m, double fraction) {
    return static_cast<Eigen::Index>(
        std::llround(fraction * static_cast<double>(m.observed_count())));
}

SeriesMatrix apply_cells(const SeriesMatrix& m, const std::vector<Cell>& cells) {
    Mask mask = m.mask();
    for (const Cell& c : cells) mask(c.row, c.station) = false;
    return SeriesMatrix(m.start_hour(), m.values(), std::move(mask), m.station_ids(),
                        m.space());
}

} // namespace

Injection inject_random_count(const SeriesMatrix& m, Eigen::Index count, std::uint64_t seed) {
    if (m.observed_count() < 1) throw NoObservedData("matrix has no observed cells");
    if (count < 0 || count > m.observed_count()) {
        throw Unsatisfiable("requested " + std::to_string(count) + " cells, only " +
                            std::to_string(m.observed_count()) + " observed");
    }
    // Row-major enumeration of observed cells, then a partial Fisher-Yates
    // draw of `count` of them.
    std::vector<Cell> pool;
    pool.reserve(m.observed_count());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index s = 0; s < m.stations(); ++s) {
            if (m.is_observed(r, s)) pool.push_back({r, s});
        }
    }
    SplitMix64 rng(seed);
    const std::size_t n = pool.size();
    for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(pool[i], pool[j]);
    }
    InjectionRecord record;
    record.seed = seed;
    record.cells.assign(pool.begin(), pool.begin() + count);
    std::sort(record.cells.begin(), record.cells.end());
    return {apply_cells(m, record.cells), std::move(record)};
}

Injection inject_random(const SeriesMatrix& m, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw InvalidConfig("random injection fraction must lie in [0, 1]");
    }
    Injection inj = inject_random_count(m, target_count(m, fraction), seed);
    inj.record.regime = RandomRegime{fraction};
    return inj;
}

Injection inject_blocks_count(const SeriesMatrix& m, Eigen::Index count, std::int64_t min_len,
                              std::int64_t max_len, std::uint64_t seed) {
    if (m.observed_count() < 1) throw NoObservedData("matrix has no observed cells");
    if (min_len < 1 || min_len > max_len || max_len > m.rows()) {
        throw InvalidConfig("block lengths must satisfy 1 <= min_len <= max_len <= rows");
    }
    if (count > m.observed_count()) {
        throw Unsatisfiable("requested " + std::to_string(count) + " cells, only " +
                            std::to_string(m.observed_count()) + " observed");
    }
    Mask working = m.mask();
    SplitMix64 rng(seed);
    InjectionRecord record;
    record.seed = seed;
    Eigen::Index hit = 0;
    while (hit < count) {
        const Eigen::Index station = static_cast<Eigen::Index>(
            rng.bounded(static_cast<std::uint64_t>(m.stations())));
        const std::int64_t len =
            min_len + static_cast<std::int64_t>(
                          rng.bounded(static_cast<std::uint64_t>(max_len - min_len + 1)));
        const Eigen::Index start = static_cast<Eigen::Index>(
            rng.bounded(static_cast<std::uint64_t>(m.rows() - len + 1)));
        for (Eigen::Index r = start; r < start + len && hit < count; ++r) {
            if (!working(r, station)) continue;
            working(r, station) = false;
            record.cells.push_back({r, station});
            ++hit;
        }
    }
    std::sort(record.cells.begin(), record.cells.end());
    return {apply_cells(m, record.cells), std::move(record)};
}

Injection inject_blocks(const SeriesMatrix& m, double fraction, std::int64_t min_len,
                        std::int64_t max_len, std::uint64_t seed) {
    if (!(fraction >= 0.0)) throw InvalidConfig("block injection fraction must be >= 0");
    Injection inj = inject_blocks_count(m, target_count(m, fraction), min_len, max_len, seed);
    inj.record.regime = BlockRegime{fraction, min_len, max_len};
    return inj;
}

nlohmann::ordered_json record_to_json(const InjectionRecord& record) {
    nlohmann::ordered_json j;
    j["seed"] = record.seed;
    if (const auto* r = std::get_if<RandomRegime>(&record.regime)) {
        j["regime"] = {{"type", "random"}, {"fraction", r->fraction}};
    } else {
        const auto& b = std::get<BlockRegime>(record.regime);
        j["regime"] = {{"type", "block"},
                       {"fraction", b.fraction},
                       {"min_len", b.min_len},
                       {"max_len", b.max_len}};
    }
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const Cell& c : record.cells) {
        cells.push_back({c.row, c.station});
    }
    j["cells"] = std::move(cells);
    return j;
}

InjectionRecord record_from_json(const nlohmann::json& j) {
    InjectionRecord record;
    record.seed = j.at("seed").get<std::uint64_t>();
    const auto& regime = j.at("regime");
    const std::string type = regime.at("type").get<std::string>();
    if (type == "random") {
        record.regime = RandomRegime{regime.at("fraction").get<double>()};
    } else if (type == "block") {
        record.regime = BlockRegime{regime.at("fraction").get<double>(),
                                    regime.at("min_len").get<std::int64_t>(),
                                    regime.at("max_len").get<std::int64_t>()};
    } else {
        throw InvalidConfig("unknown injection regime '" + type + "'");
    }
    for (const auto& c : j.at("cells")) {
        record.cells.push_back({c.at(0).get<Eigen::Index>(), c.at(1).get<Eigen::Index>()});
    }
    return record;
}

} // namespace gapdyn
