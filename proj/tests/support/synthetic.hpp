#pragma once

#include "gapdyn/rng.hpp"
#include "gapdyn/series.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

namespace testsupport {

/// Box-Muller Gaussian on SplitMix64, so fixtures are identical everywhere.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = rng_.next_double();
        while (u1 <= 0.0) u1 = rng_.next_double();
        const double u2 = rng_.next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    gapdyn::SplitMix64& raw() { return rng_; }

private:
    gapdyn::SplitMix64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::vector<std::string> default_ids(Eigen::Index n) {
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back("S" + std::to_string(i + 1));
    return ids;
}

/// Builds a SeriesMatrix from a dense matrix where NaN marks missing cells.
inline gapdyn::SeriesMatrix series_from(std::int64_t start_hour, const Eigen::MatrixXd& values,
                                        gapdyn::Space space,
                                        std::vector<std::string> ids = {}) {
    gapdyn::Mask mask(values.rows(), values.cols());
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            mask(r, c) = std::isfinite(values(r, c));
        }
    }
    if (ids.empty()) ids = default_ids(values.cols());
    return gapdyn::SeriesMatrix(start_hour, values, std::move(mask), std::move(ids), space);
}

/// Sparse stable map: diagonal plus one off-diagonal entry per row, rescaled
/// to the requested spectral radius. Entries stay well above typical
/// thresholding levels.
inline Eigen::MatrixXd sparse_stable_dynamics(Eigen::Index n, std::uint64_t seed,
                                              double spectral_radius) {
    gapdyn::SplitMix64 rng(seed);
    Eigen::MatrixXd dynamics = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        dynamics(r, r) = 0.55 + 0.35 * (static_cast<double>(rng.bounded(1000)) / 1000.0);
        Eigen::Index other = static_cast<Eigen::Index>(rng.bounded(n - 1));
        if (other >= r) ++other;
        const double sign = rng.bounded(2) == 0 ? 1.0 : -1.0;
        dynamics(r, other) =
            sign * (0.25 + 0.25 * (static_cast<double>(rng.bounded(1000)) / 1000.0));
    }
    const auto eigenvalues = Eigen::EigenSolver<Eigen::MatrixXd>(dynamics).eigenvalues();
    double radius = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        radius = std::max(radius, std::abs(eigenvalues(i)));
    }
    dynamics *= spectral_radius / radius;
    return dynamics;
}

/// Simulates x_{t+1} = A x_t + sigma * eps from a random initial state, with
/// a burn-in so noisy runs sample the stationary regime (pass burn_in = 0 for
/// noiseless decaying trajectories). `common_share` in [0, 1] blends a shared
/// innovation into every component, the way co-located stations see the same
/// regional events. Returns steps × n states.
inline Eigen::MatrixXd simulate_linear(const Eigen::MatrixXd& dynamics, Eigen::Index steps,
                                       double noise_sigma, std::uint64_t seed,
                                       Eigen::Index burn_in = 256,
                                       double common_share = 0.0) {
    const Eigen::Index n = dynamics.rows();
    Gaussian gauss(seed);
    const double shared_w = std::sqrt(common_share);
    const double own_w = std::sqrt(1.0 - common_share);
    Eigen::VectorXd state(n);
    for (Eigen::Index i = 0; i < n; ++i) state(i) = gauss();
    const auto step = [&] {
        const double shared = gauss();
        Eigen::VectorXd noise(n);
        for (Eigen::Index i = 0; i < n; ++i) noise(i) = shared_w * shared + own_w * gauss();
        state = dynamics * state + noise_sigma * noise;
    };
    for (Eigen::Index t = 0; t < burn_in; ++t) step();
    Eigen::MatrixXd out(steps, n);
    for (Eigen::Index t = 0; t < steps; ++t) {
        out.row(t) = state.transpose();
        step();
    }
    return out;
}

/// Sparse stable map with positive, diagonal-dominant couplings: every
/// station persists strongly and leans on one upwind peer, so the network
/// co-moves the way a regional pollutant field does.
inline Eigen::MatrixXd cohesive_dynamics(Eigen::Index n, std::uint64_t seed,
                                         double spectral_radius) {
    gapdyn::SplitMix64 rng(seed);
    Eigen::MatrixXd dynamics = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        dynamics(r, r) = 0.80 + 0.12 * (static_cast<double>(rng.bounded(1000)) / 1000.0);
        Eigen::Index other = static_cast<Eigen::Index>(rng.bounded(n - 1));
        if (other >= r) ++other;
        dynamics(r, other) =
            0.05 + 0.08 * (static_cast<double>(rng.bounded(1000)) / 1000.0);
    }
    const auto eigenvalues = Eigen::EigenSolver<Eigen::MatrixXd>(dynamics).eigenvalues();
    double radius = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        radius = std::max(radius, std::abs(eigenvalues(i)));
    }
    dynamics *= spectral_radius / radius;
    return dynamics;
}

/// Two-period hourly dataset on a PM-like raw scale, driven by sparse stable
/// linear dynamics plus (optionally cross-correlated) process noise.
inline gapdyn::SeriesMatrix two_period_dataset(Eigen::Index rows, Eigen::Index stations,
                                               std::uint64_t seed, double spectral_radius,
                                               double noise_sigma, std::int64_t start_hour,
                                               double common_share = 0.0,
                                               bool cohesive = false) {
    const Eigen::MatrixXd dynamics =
        cohesive ? cohesive_dynamics(stations, seed, spectral_radius)
                 : sparse_stable_dynamics(stations, seed, spectral_radius);
    const Eigen::MatrixXd states = simulate_linear(dynamics, rows, noise_sigma,
                                                   gapdyn::mix64(seed), 256, common_share);
    const Eigen::MatrixXd values = (25.0 + 12.0 * states.array()).matrix();
    return series_from(start_hour, values, gapdyn::Space::Raw);
}

/// Seeded uniform random mask: masks exactly `count` cells of a fully
/// observed grid (test fixture; independent of the library's injector).
inline gapdyn::Mask random_mask(Eigen::Index rows, Eigen::Index cols, Eigen::Index masked,
                                std::uint64_t seed) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows * cols));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    gapdyn::SplitMix64 rng(seed);
    for (Eigen::Index i = 0; i < masked; ++i) {
        const std::size_t j = static_cast<std::size_t>(i) +
                              static_cast<std::size_t>(rng.bounded(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    gapdyn::Mask mask = gapdyn::Mask::Constant(rows, cols, true);
    for (Eigen::Index i = 0; i < masked; ++i) {
        mask(idx[i] / cols, idx[i] % cols) = false;
    }
    return mask;
}

} // namespace testsupport
