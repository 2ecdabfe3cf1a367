#include "gapdyn/knn_impute.hpp"

#include "gapdyn/errors.hpp"

#include <cmath>
#include <vector>

namespace gapdyn {

std::optional<double> masked_distance(std::span<const double> a, std::span<const double> b,
                                      std::span<const bool> mask_a,
                                      std::span<const bool> mask_b) {
    if (a.size() != b.size() || a.size() != mask_a.size() || a.size() != mask_b.size()) {
        throw ShapeMismatch("masked_distance requires rows of equal width");
    }
    double ss = 0.0;
    std::size_t shared = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask_a[i] || !mask_b[i]) continue;
        const double d = a[i] - b[i];
        ss += d * d;
        ++shared;
    }
    if (shared == 0) return std::nullopt;
    return std::sqrt(ss * static_cast<double>(a.size()) / static_cast<double>(shared));
}

namespace {

struct Neighbor {
    double dist;
    Eigen::Index time_gap;
    Eigen::Index row;
    double value;
};

// Ordering of the (distance, |t'-t|, t') tie-break chain.
bool closer(const Neighbor& a, const Neighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.time_gap != b.time_gap) return a.time_gap < b.time_gap;
    return a.row < b.row;
}

// Bounded insertion keeping the k best in sorted order.
void consider(std::vector<Neighbor>& best, std::size_t k, const Neighbor& cand) {
    if (best.size() == k && !closer(cand, best.back())) return;
    auto it = best.begin();
    while (it != best.end() && closer(*it, cand)) ++it;
    best.insert(it, cand);
    if (best.size() > k) best.pop_back();
}

} // namespace

SeriesMatrix knn_impute(const SeriesMatrix& m, const KnnConfig& cfg) {
    if (cfg.k < 1) throw InvalidConfig("k must be >= 1");
    if (m.space() != Space::Normalized) {
        throw SpaceMismatch("knn_impute expects a Normalized-space matrix");
    }
    const Eigen::Index n_rows = m.rows();
    const Eigen::Index n_stations = m.stations();
    const std::size_t k = static_cast<std::size_t>(cfg.k);

    Eigen::VectorXd fallback(n_stations);
    for (Eigen::Index s = 0; s < n_stations; ++s) {
        double sum = 0.0;
        Eigen::Index n = 0;
        for (Eigen::Index r = 0; r < n_rows; ++r) {
            if (!m.is_observed(r, s)) continue;
            sum += m.values()(r, s);
            ++n;
        }
        if (n == 0) throw NoObservedData("station '" + m.station_ids()[s] +
                                         "' has no observed cells");
        fallback(s) = sum / static_cast<double>(n);
    }

    // Row-major copies keep the all-pairs distance scan cache-friendly.
    using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using RowMajorB = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajorD values = m.values();
    const RowMajorB mask = m.mask();

    Eigen::MatrixXd out = m.values();
    std::vector<Eigen::Index> targets;
    std::vector<std::vector<Neighbor>> best(n_stations);
    for (Eigen::Index t = 0; t < n_rows; ++t) {
        targets.clear();
        for (Eigen::Index s = 0; s < n_stations; ++s) {
            if (!mask(t, s)) targets.push_back(s);
        }
        if (targets.empty()) continue;
        for (Eigen::Index s : targets) {
            best[s].clear();
            best[s].reserve(k + 1);
        }

        const double* row_t = values.row(t).data();
        const bool* mask_t = mask.row(t).data();
        for (Eigen::Index u = 0; u < n_rows; ++u) {
            if (u == t) continue;
            const double* row_u = values.row(u).data();
            const bool* mask_u = mask.row(u).data();
            double ss = 0.0;
            Eigen::Index shared = 0;
            for (Eigen::Index i = 0; i < n_stations; ++i) {
                if (!mask_t[i] || !mask_u[i]) continue;
                const double d = row_t[i] - row_u[i];
                ss += d * d;
                ++shared;
            }
            if (shared == 0) continue;
            const double dist =
                std::sqrt(ss * static_cast<double>(n_stations) / static_cast<double>(shared));
            const Eigen::Index gap = u > t ? u - t : t - u;
            for (Eigen::Index s : targets) {
                if (!mask_u[s]) continue;
                consider(best[s], k, {dist, gap, u, row_u[s]});
            }
        }

        for (Eigen::Index s : targets) {
            if (best[s].empty()) {
                out(t, s) = fallback(s);
                continue;
            }
            double sum = 0.0;
            for (const Neighbor& nb : best[s]) sum += nb.value;
            out(t, s) = sum / static_cast<double>(best[s].size());
        }
    }

    return SeriesMatrix(m.start_hour(), std::move(out),
                        Mask::Constant(n_rows, n_stations, true), m.station_ids(), m.space());
}

} // namespace gapdyn
