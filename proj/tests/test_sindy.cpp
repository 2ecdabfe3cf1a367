#include <doctest.h>

#include "gapdyn/errors.hpp"
#include "gapdyn/metrics.hpp"
#include "gapdyn/sindy.hpp"

#include "support/synthetic.hpp"

#include <limits>

using namespace gapdyn;
using namespace gapdyn::sindy;
using testsupport::series_from;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Degree-1 model whose linear block encodes x_{t+1} = A x_t exactly.
SindyModel model_from_dynamics(const Eigen::MatrixXd& dynamics) {
    const Eigen::Index n = dynamics.rows();
    SindyModel model;
    model.station_ids = testsupport::default_ids(n);
    model.library = {.degree = 1, .include_constant = true};
    model.threshold = 0.0;
    model.ridge = 0.0;
    model.xi = Eigen::MatrixXd::Zero(n + 1, n);
    model.xi.bottomRows(n) = dynamics.transpose();
    return model;
}

} // namespace

TEST_CASE("build_library enumerates monomials in graded-lex order") {
    Eigen::MatrixXd state(1, 2);
    state << 2, 3;
    const Eigen::MatrixXd theta = build_library(state, {.degree = 2});
    REQUIRE(theta.cols() == 6);
    const double expected[] = {1, 2, 3, 4, 6, 9};
    for (int i = 0; i < 6; ++i) CHECK(theta(0, i) == expected[i]);

    const Eigen::MatrixXd linear = build_library(state, {.degree = 1});
    REQUIRE(linear.cols() == 3);
    CHECK(linear(0, 0) == 1);
    CHECK(linear(0, 1) == 2);
    CHECK(linear(0, 2) == 3);

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 4);
    const Eigen::MatrixXd at_zero = build_library(zero, {.degree = 3});
    CHECK(at_zero(0, 0) == 1.0);
    CHECK(at_zero.row(0).tail(at_zero.cols() - 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("library size follows the binomial law") {
    for (Eigen::Index stations = 1; stations <= 6; ++stations) {
        for (int degree = 1; degree <= 3; ++degree) {
            const LibrarySpec with{.degree = degree, .include_constant = true};
            const LibrarySpec without{.degree = degree, .include_constant = false};
            CHECK(library_size(stations, with) ==
                  static_cast<Eigen::Index>(library_terms(stations, with).size()));
            CHECK(library_size(stations, without) == library_size(stations, with) - 1);
        }
    }
    CHECK(library_size(5, {.degree = 2}) == 21);
    CHECK(library_size(2, {.degree = 2}) == 6);
}

TEST_CASE("stlsq recovers an exact sparse column") {
    testsupport::Gaussian gauss(12);
    const Eigen::Index n = 200;
    Eigen::MatrixXd theta(n, 2);
    Eigen::MatrixXd y(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        theta(i, 0) = 1.0;
        theta(i, 1) = gauss();
        y(i, 0) = 0.9 * theta(i, 1);
    }
    const Eigen::MatrixXd xi = stlsq(theta, y, 0.1, 0.0, 10);
    CHECK(xi(0, 0) == doctest::Approx(0.0));
    CHECK(xi(1, 0) == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("a threshold above every coefficient yields a zero column") {
    testsupport::Gaussian gauss(13);
    Eigen::MatrixXd theta(50, 3);
    Eigen::MatrixXd y(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (int j = 0; j < 3; ++j) theta(i, j) = gauss();
        y(i, 0) = 0.05 * theta(i, 0);
    }
    const Eigen::MatrixXd xi = stlsq(theta, y, 10.0, 0.0, 10);
    CHECK(xi.norm() == 0.0);
}

TEST_CASE("stlsq flags rank deficiency without ridge") {
    Eigen::MatrixXd theta(20, 2);
    testsupport::Gaussian gauss(14);
    for (Eigen::Index i = 0; i < 20; ++i) {
        theta(i, 0) = gauss();
        theta(i, 1) = theta(i, 0);  // duplicate column
    }
    Eigen::MatrixXd y = theta.col(0);
    CHECK_THROWS_AS(stlsq(theta, y, 0.01, 0.0, 5), RankDeficient);
    // A positive ridge resolves it.
    CHECK_NOTHROW(stlsq(theta, y, 0.01, 1e-6, 5));
}

TEST_CASE("stlsq recovers sparse linear dynamics from noisy simulation") {
    const Eigen::MatrixXd dynamics = testsupport::sparse_stable_dynamics(5, 13, 0.9);
    const Eigen::MatrixXd states = testsupport::simulate_linear(dynamics, 8000, 0.01, 1301);

    Eigen::MatrixXd x = states.topRows(7999);
    Eigen::MatrixXd y = states.bottomRows(7999);
    const Eigen::MatrixXd theta = build_library(x, {.degree = 1});
    const Eigen::MatrixXd xi = stlsq(theta, y, 0.05, 0.0, 20);

    CHECK(xi.row(0).cwiseAbs().maxCoeff() == 0.0);  // no constant term in truth
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) {
            const double estimated = xi(1 + i, j);
            const double truth = dynamics(j, i);
            CHECK((estimated != 0.0) == (truth != 0.0));
            CHECK(std::abs(estimated - truth) < 1e-2);
        }
    }
}

TEST_CASE("fit drops pairs touching masked rows") {
    const Eigen::MatrixXd dynamics = testsupport::sparse_stable_dynamics(3, 7, 0.85);
    Eigen::MatrixXd states = testsupport::simulate_linear(dynamics, 2000, 0.02, 8);

    SUBCASE("clean training recovers the dynamics") {
        const SeriesMatrix train = series_from(0, states, Space::Normalized);
        const SindyModel model = fit(train, {.degree = 1}, 0.05, 0.0);
        CHECK(model.diagnostics.pairs_used == 1999);
        for (Eigen::Index i = 0; i < 3; ++i) {
            for (Eigen::Index j = 0; j < 3; ++j) {
                CHECK(std::abs(model.xi(1 + i, j) - dynamics(j, i)) < 3e-2);
            }
        }
        // Thresholding invariant: every surviving weight clears the threshold.
        for (Eigen::Index r = 0; r < model.xi.rows(); ++r) {
            for (Eigen::Index c = 0; c < model.xi.cols(); ++c) {
                if (model.xi(r, c) != 0.0) CHECK(std::abs(model.xi(r, c)) >= 0.05);
            }
        }
    }
    SUBCASE("masking every second row starves the pairing") {
        for (Eigen::Index r = 1; r < states.rows(); r += 2) states(r, 0) = kNaN;
        const SeriesMatrix train = series_from(0, states, Space::Normalized);
        CHECK_THROWS_AS(fit(train, {.degree = 1}, 0.05, 0.0), InsufficientPairs);
    }
    SUBCASE("raw space is rejected") {
        CHECK_THROWS_AS(fit(series_from(0, states, Space::Raw), {.degree = 1}, 0.05, 0.0),
                        SpaceMismatch);
    }
}

TEST_CASE("a constant series learns a map that reproduces the constant") {
    Eigen::MatrixXd states = Eigen::MatrixXd::Constant(100, 1, 0.7);
    const SeriesMatrix train = series_from(0, states, Space::Normalized);
    const SindyModel model = fit(train, {.degree = 2}, 0.05, 1e-6);
    Eigen::VectorXd state(1);
    state << 0.7;
    CHECK(predict_one_step(model, state)(0) == doctest::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("predict_one_step evaluates the library against xi") {
    SUBCASE("halving model") {
        SindyModel model;
        model.station_ids = {"a"};
        model.library = {.degree = 1};
        model.xi = Eigen::MatrixXd::Zero(2, 1);
        model.xi(1, 0) = 0.5;
        Eigen::VectorXd state(1);
        state << 2;
        CHECK(predict_one_step(model, state)(0) == doctest::Approx(1.0));
    }
    SUBCASE("all-zero xi predicts zero") {
        SindyModel model;
        model.station_ids = {"a", "b"};
        model.library = {.degree = 2};
        model.xi = Eigen::MatrixXd::Zero(6, 2);
        Eigen::VectorXd state(2);
        state << 3, -4;
        CHECK(predict_one_step(model, state).norm() == 0.0);
    }
    SUBCASE("constant-only xi predicts the constants") {
        SindyModel model;
        model.station_ids = {"a", "b"};
        model.library = {.degree = 1};
        model.xi = Eigen::MatrixXd::Zero(3, 2);
        model.xi(0, 0) = 1.25;
        model.xi(0, 1) = -2.5;
        Eigen::VectorXd state(2);
        state << 9, 9;
        const Eigen::VectorXd pred = predict_one_step(model, state);
        CHECK(pred(0) == 1.25);
        CHECK(pred(1) == -2.5);
    }
    SUBCASE("wrong state width is a shape mismatch") {
        SindyModel model;
        model.station_ids = {"a", "b"};
        model.library = {.degree = 1};
        model.xi = Eigen::MatrixXd::Zero(3, 2);
        Eigen::VectorXd state(3);
        state << 1, 2, 3;
        CHECK_THROWS_AS(predict_one_step(model, state), ShapeMismatch);
    }
}

TEST_CASE("refine_imputation overwrites only missing cells, forward in time") {
    const Eigen::MatrixXd dynamics = testsupport::sparse_stable_dynamics(4, 100, 0.9);
    // Noiseless decaying trajectory from a random start: x_{t+1} = A x_t holds
    // exactly, so the true-dynamics model is a perfect one-step predictor.
    const Eigen::MatrixXd truth = testsupport::simulate_linear(dynamics, 60, 0.0, 101, 0);
    const SindyModel model = model_from_dynamics(dynamics);
    const SeriesMatrix clean = series_from(0, truth, Space::Normalized);

    SUBCASE("no missing cells is the identity") {
        const SeriesMatrix out = refine_imputation(model, clean, {});
        CHECK(out.values() == truth);
    }
    SUBCASE("a single missing cell with the true model is recovered exactly") {
        Eigen::MatrixXd imputed = truth;
        imputed(30, 2) = 12345.0;  // stand-in imputation, should be replaced
        const SeriesMatrix input = series_from(0, imputed, Space::Normalized);
        const SeriesMatrix out =
            refine_imputation(model, input, std::vector<Cell>{{30, 2}});
        CHECK(out.values()(30, 2) == doctest::Approx(truth(30, 2)).epsilon(1e-12));
        // Everything else untouched.
        for (Eigen::Index r = 0; r < 60; ++r) {
            for (Eigen::Index s = 0; s < 4; ++s) {
                if (r == 30 && s == 2) continue;
                CHECK(out.values()(r, s) == imputed(r, s));
            }
        }
    }
    SUBCASE("row 0 keeps its imputed values") {
        Eigen::MatrixXd imputed = truth;
        imputed.row(0).setConstant(7.0);
        const SeriesMatrix input = series_from(0, imputed, Space::Normalized);
        const SeriesMatrix out = refine_imputation(
            model, input, std::vector<Cell>{{0, 0}, {0, 1}, {0, 2}, {0, 3}});
        CHECK(out.values().row(0) == imputed.row(0));
    }
    SUBCASE("an imputer already at ground truth keeps IOA at 1 after refinement") {
        std::vector<Cell> missing{{5, 0}, {6, 1}, {20, 3}, {21, 3}, {40, 2}};
        const SeriesMatrix out = refine_imputation(model, clean, missing);
        std::vector<double> o, p;
        for (const Cell& c : missing) {
            o.push_back(truth(c.row, c.station));
            p.push_back(out.values()(c.row, c.station));
        }
        CHECK(ioa(o, p) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("station count mismatch is rejected") {
        const SindyModel narrow =
            model_from_dynamics(testsupport::sparse_stable_dynamics(3, 1, 0.8));
        CHECK_THROWS_AS(refine_imputation(narrow, clean, {}), ShapeMismatch);
    }
    SUBCASE("matrices with holes are rejected") {
        Eigen::MatrixXd holed = truth;
        holed(3, 3) = kNaN;
        const SeriesMatrix input = series_from(0, holed, Space::Normalized);
        CHECK_THROWS_AS(refine_imputation(model, input, std::vector<Cell>{{3, 3}}),
                        InvalidConfig);
    }
}

TEST_CASE("model JSON round-trips with bit-exact predictions") {
    const Eigen::MatrixXd dynamics = testsupport::sparse_stable_dynamics(4, 55, 0.88);
    const Eigen::MatrixXd states = testsupport::simulate_linear(dynamics, 600, 0.01, 56);
    const SindyModel model =
        fit(series_from(0, states, Space::Normalized), {.degree = 2}, 0.05, 1e-6);

    const std::string text = model_to_json(model).dump(2);
    const SindyModel loaded = model_from_json(nlohmann::json::parse(text));

    CHECK(loaded.station_ids == model.station_ids);
    CHECK(loaded.xi == model.xi);
    CHECK(loaded.diagnostics.pairs_used == model.diagnostics.pairs_used);

    testsupport::Gaussian gauss(57);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd state(4);
        for (int i = 0; i < 4; ++i) state(i) = gauss();
        const Eigen::VectorXd a = predict_one_step(model, state);
        const Eigen::VectorXd b = predict_one_step(loaded, state);
        CHECK(a == b);
    }
}
