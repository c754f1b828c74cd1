#include "catch2/catch_amalgamated.hpp"

#include <cmath>

#include "scaleup/calibrate.hpp"

using namespace scaleup;
using Catch::Approx;

TEST_CASE("visibility scaling divides everything by tau") {
    SizeEstimate est;
    est.method = "mle";
    est.point = 100.0;
    est.se = 10.0;
    est.interval = {80.0, 120.0};
    est.metadata["decisions"] = Json::array();

    const SizeEstimate up = scale_by_visibility(est, {0.5, "study"});
    CHECK(up.point == Approx(200.0));
    CHECK(*up.se == Approx(20.0));
    CHECK(up.interval->first == Approx(160.0));
    CHECK(up.interval->second == Approx(240.0));
    REQUIRE(up.calibrations_applied.size() == 1);
    CHECK(up.calibrations_applied[0] == "visibility");
    CHECK(up.metadata["decisions"].size() == 1);

    CHECK_THROWS_AS(scale_by_visibility(est, {0.0, ""}), ModelError);
    CHECK_THROWS_AS(scale_by_visibility(est, {1.5, ""}), ModelError);
    CHECK_NOTHROW(scale_by_visibility(est, {1.0, ""}));
}

TEST_CASE("curve anchor and frozen value") {
    // f(b) = b exactly, for any curvature.
    for (double a : {0.3, 1.0, 2.5})
        for (double b : {-6.0, 0.0, 1.5})
            CHECK(curve_value({a, b, ""}, b) == Approx(b).margin(1e-15));

    // f(2) with a=1, b=0: 1 + (1 - e^-2)/2.
    CHECK(curve_value({1.0, 0.0, ""}, 2.0) == Approx(1.4323323583816937).margin(1e-9));
}

TEST_CASE("curve slope stays above one half and the map is increasing") {
    const CalibrationCurve c{0.8, -4.0, ""};
    double prev = curve_value(c, -10.0);
    for (double beta = -9.9; beta < 2.0; beta += 0.1) {
        CHECK(curve_slope(c, beta) > 0.5);
        const double v = curve_value(c, beta);
        CHECK(v > prev);
        prev = v;
    }
    // Far above the anchor the slope approaches 1/2 from above.
    CHECK(curve_slope(c, 40.0) == Approx(0.5).margin(1e-9));
}

TEST_CASE("curve inversion round-trips") {
    for (double a : {0.5, 1.0, 2.0}) {
        const CalibrationCurve c{a, -5.0, ""};
        for (double beta : {-9.0, -6.2, -5.0, -3.3, -0.5}) {
            const double recalled = curve_value(c, beta);
            CHECK(invert_curve(c, recalled) == Approx(beta).margin(1e-9));
        }
    }
}

TEST_CASE("curve fitting recovers known parameters") {
    const CalibrationCurve truth{0.8, -5.0, ""};
    std::vector<double> bt, br;
    for (double beta = -8.0; beta <= -2.0; beta += 0.75) {
        bt.push_back(beta);
        br.push_back(curve_value(truth, beta));
    }
    const CalibrationCurve fit = fit_calibration_curve(bt, br, "synthetic");
    CHECK(fit.a == Approx(truth.a).margin(1e-3));
    CHECK(fit.b == Approx(truth.b).margin(1e-3));
    CHECK(fit.fitted_on == "synthetic");

    CHECK_THROWS_AS(fit_calibration_curve({1.0}, {1.0}), ModelError);
}

TEST_CASE("curve correction of an estimate undoes the distortion") {
    const long long N = 100000;
    const CalibrationCurve c{1.2, std::log(0.03), ""};
    const double true_size = 2000.0;
    const double distorted = N * std::exp(curve_value(c, std::log(true_size / N)));

    SizeEstimate est;
    est.method = "mle";
    est.point = distorted;
    est.se = distorted / 10.0;
    est.interval = {0.8 * distorted, 1.2 * distorted};
    const SizeEstimate fixed = apply_curve_to_estimate(est, c, N);
    CHECK(fixed.point == Approx(true_size).epsilon(1e-6));
    CHECK(fixed.calibrations_applied.back() == "recall_curve");
    // Interval endpoints pass through the same inverse map.
    const double lo_beta = invert_curve(c, std::log(0.8 * distorted / N));
    CHECK(fixed.interval->first == Approx(N * std::exp(lo_beta)).epsilon(1e-9));

    SizeEstimate zero;
    zero.point = 0.0;
    CHECK_THROWS_AS(apply_curve_to_estimate(zero, c, N), ModelError);
}

TEST_CASE("errors-in-variables fit on an exact line") {
    std::vector<double> x, y, s;
    for (int k = 0; k < 6; ++k) {
        x.push_back(5.0 + 0.5 * k);
        y.push_back(0.7 + 1.3 * x.back());
        s.push_back(0.1);
    }
    const EivFit fit = fit_eiv(x, y, s);
    CHECK(fit.a == Approx(0.7).margin(1e-6));
    CHECK(fit.b == Approx(1.3).margin(1e-6));
    CHECK(fit.sigma_eps == Approx(0.0).margin(1e-6));

    // With the exact fit and no residual noise the correction inverts the line.
    const std::vector<double> draws = {7.2, 8.0, 9.5};
    const auto adj = eiv_adjust_log_draws(fit, draws, 77);
    for (std::size_t i = 0; i < draws.size(); ++i)
        CHECK(adj[i] == Approx((draws[i] - 0.7) / 1.3).margin(1e-9));
}

TEST_CASE("errors-in-variables fit with noise recovers the slope region") {
    Rng rng = make_rng(2024, "eiv");
    std::vector<double> x, y, s;
    for (int k = 0; k < 60; ++k) {
        const double xv = 4.0 + 0.08 * k;
        const double sk = 0.15;
        x.push_back(xv);
        s.push_back(sk);
        y.push_back(0.5 + 0.8 * xv + rnorm(rng, 0.0, sk) + rnorm(rng, 0.0, 0.3));
    }
    const EivFit fit = fit_eiv(x, y, s);
    CHECK(fit.b == Approx(0.8).margin(0.25));
    CHECK(fit.sigma_eps == Approx(0.3).margin(0.2));
    CHECK(fit.sigma_eps >= 0.0);
}

TEST_CASE("degenerate recall slope is rejected") {
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> y = {5.0, 5.0, 5.0, 5.0};
    std::vector<double> s = {0.1, 0.1, 0.1, 0.1};
    CHECK_THROWS_WITH(fit_eiv(x, y, s), Catch::Matchers::ContainsSubstring("degenerate recall slope"));
    CHECK_THROWS_AS(fit_eiv({1.0, 2.0}, {1.0, 2.0}, {0.1, 0.1}), ModelError);
}

TEST_CASE("draw-level correction is reproducible and seed-sensitive") {
    EivFit fit;
    fit.a = 0.4;
    fit.b = 0.9;
    fit.sigma_eps = 0.2;

    PosteriorDraws draws;
    draws.param_names = {"N_u"};
    draws.values = {{{1000.0, 1200.0, 900.0}, {1100.0, 950.0, 1050.0}}};

    const PosteriorDraws a = eiv_adjust_size_draws(draws, fit, 5);
    const PosteriorDraws b = eiv_adjust_size_draws(draws, fit, 5);
    const PosteriorDraws c = eiv_adjust_size_draws(draws, fit, 6);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    // Rough scale: (log 1000 - 0.4)/0.9 in log space.
    const double expect = std::exp((std::log(1000.0) - 0.4) / 0.9);
    CHECK(a.values[0][0][0] == Approx(expect).epsilon(0.5));

    PosteriorDraws bad = draws;
    bad.values[0][0][0] = -1.0;
    CHECK_THROWS_AS(eiv_adjust_size_draws(bad, fit, 5), ModelError);
}
