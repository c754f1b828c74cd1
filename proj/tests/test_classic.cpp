#include "catch2/catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "scaleup/classic.hpp"

using namespace scaleup;
using Catch::Approx;

TEST_CASE("degree estimates on the canonical survey") {
    const ArdSurvey s = testutil::canonical_survey();
    const auto ratio = pimle_degrees(s);
    CHECK(ratio.values[0] == Approx(100.0));
    CHECK(ratio.values[1] == Approx(200.0));
    CHECK(ratio.undefined == 0);
    const auto scaled = mos_degrees(s);
    CHECK(scaled.values[0] == Approx(100.0));
    CHECK(scaled.values[1] == Approx(200.0));
}

TEST_CASE("closed-form estimates on the canonical survey") {
    const ArdSurvey s = testutil::canonical_survey();
    const std::size_t u = 2;
    CHECK(pimle(s, u).point == Approx(30.0));
    const SizeEstimate m = mle(s, u);
    CHECK(m.point == Approx(30.0));
    REQUIRE(m.se.has_value());
    CHECK(*m.se == Approx(10.0));
    REQUIRE(m.interval.has_value());
    CHECK(m.interval->first == Approx(30.0 - 19.6));
    CHECK(m.interval->second == Approx(30.0 + 19.6));
    CHECK(mos(s, u).point == Approx(30.0));
    CHECK(weighted_mle(s, u).point == Approx(40.0));
    CHECK(weighted_mos(s, u).point == Approx(45.0));
}

TEST_CASE("interval is truncated to [0, N]") {
    ArdSurvey s = testutil::canonical_survey();
    s.responses = {{1, 1, 900}, {1, 1, 900}};
    const SizeEstimate m = mle(s, 2);
    REQUIRE(m.interval.has_value());
    CHECK(m.interval->first >= 0.0);
    CHECK(m.interval->second <= 1000.0);
}

TEST_CASE("the two ratio-of-sums forms agree on complete data") {
    // N * sum y_u / sum d == sum y_u * sum N_k / sum_all y_known.
    Rng rng = make_rng(101, "two-forms");
    for (int rep = 0; rep < 50; ++rep) {
        const ArdSurvey s = testutil::random_survey(rng, 40, 5);
        const std::size_t u = s.unknown_columns()[0];
        double ysum = 0.0, yknown = 0.0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            ysum += s.responses[i][u];
            for (std::size_t j : s.known_columns()) yknown += s.responses[i][j];
        }
        const double direct = ysum * static_cast<double>(s.total_known_size()) / yknown;
        const double viaDegrees = mle(s, u).point;
        CHECK(viaDegrees == Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("respondent order does not change the estimates") {
    Rng rng = make_rng(11, "perm");
    ArdSurvey s = testutil::random_survey(rng, 25, 4);
    s.weights.assign(s.n(), 1.0);
    for (std::size_t i = 0; i < s.n(); ++i) s.weights[i] = 0.5 + runif(rng);
    const std::size_t u = s.unknown_columns()[0];

    ArdSurvey shuffled = s;
    std::vector<std::size_t> perm(s.n());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.responses[i] = s.responses[perm[i]];
        shuffled.weights[i] = s.weights[perm[i]];
    }

    CHECK(pimle(shuffled, u).point == Approx(pimle(s, u).point).epsilon(1e-12));
    CHECK(mle(shuffled, u).point == Approx(mle(s, u).point).epsilon(1e-12));
    CHECK(mos(shuffled, u).point == Approx(mos(s, u).point).epsilon(1e-12));
    CHECK(weighted_mle(shuffled, u).point == Approx(weighted_mle(s, u).point).epsilon(1e-12));
    CHECK(weighted_mos(shuffled, u).point == Approx(weighted_mos(s, u).point).epsilon(1e-12));
}

TEST_CASE("scaling N and every known size by c") {
    // Degrees are ratios of counts to size fractions, so they are invariant;
    // size estimates scale linearly.
    Rng rng = make_rng(12, "scale");
    const ArdSurvey s = testutil::random_survey(rng, 30, 4);
    const std::size_t u = s.unknown_columns()[0];
    ArdSurvey big = s;
    const long long c = 7;
    big.population_total *= c;
    for (std::size_t j : big.known_columns()) big.known_size[j] *= c;

    const auto d1 = pimle_degrees(s), d2 = pimle_degrees(big);
    for (std::size_t i = 0; i < s.n(); ++i)
        CHECK(d2.values[i] == Approx(d1.values[i]).epsilon(1e-12));
    const auto m1 = mos_degrees(s), m2 = mos_degrees(big);
    for (std::size_t i = 0; i < s.n(); ++i)
        CHECK(m2.values[i] == Approx(m1.values[i]).epsilon(1e-12));

    CHECK(pimle(big, u).point == Approx(7.0 * pimle(s, u).point).epsilon(1e-12));
    CHECK(mle(big, u).point == Approx(7.0 * mle(s, u).point).epsilon(1e-12));
    CHECK(mos(big, u).point == Approx(7.0 * mos(s, u).point).epsilon(1e-12));
}

TEST_CASE("missing and zero-degree respondents are excluded and counted") {
    ArdSurvey s = testutil::canonical_survey();
    s.responses.push_back({0, 0, 5});                         // zero degree
    s.responses.push_back({10, 10, missing_response});        // no answer for the unknown
    s.respondent_ids = {};
    s.weights = {};

    const SizeEstimate p = pimle(s, 2);
    CHECK(p.point == Approx(30.0)); // the two canonical respondents only
    CHECK(p.metadata["excluded_respondents"].get<int>() == 2);

    // Ratio of sums keeps the zero-degree respondent's numerator count.
    const SizeEstimate m = mle(s, 2);
    CHECK(m.point == Approx(1000.0 * 14.0 / 300.0));
    CHECK(m.metadata["excluded_respondents"].get<int>() == 1);
}

TEST_CASE("degenerate surveys raise model errors") {
    ArdSurvey s = testutil::canonical_survey();
    s.responses = {{0, 0, 1}, {0, 0, 2}};
    CHECK_THROWS_AS(mle(s, 2), ModelError);
    CHECK_THROWS_AS(pimle(s, 2), ModelError);

    ArdSurvey nk;
    nk.population_total = 100;
    nk.column_names = {"u"};
    nk.known_size = {unknown_size};
    nk.responses = {{1}};
    CHECK_THROWS_AS(pimle_degrees(nk), ModelError);
}

TEST_CASE("weighted estimators require weights and scale with them") {
    ArdSurvey s = testutil::canonical_survey();
    ArdSurvey nw = s;
    nw.weights.clear();
    CHECK_THROWS_AS(weighted_mle(nw, 2), ModelError);
    CHECK_THROWS_AS(weighted_mos(nw, 2), ModelError);

    ArdSurvey doubled = s;
    for (auto& w : doubled.weights) w *= 2.0;
    CHECK(weighted_mle(doubled, 2).point == Approx(2.0 * weighted_mle(s, 2).point));
    CHECK(weighted_mos(doubled, 2).point == Approx(2.0 * weighted_mos(s, 2).point));
}

TEST_CASE("tiny known subpopulations trigger a scaled-mean caution") {
    ArdSurvey s = testutil::canonical_survey();
    s.population_total = 1000000;
    const SizeEstimate est = mos(s, 2);
    REQUIRE(est.metadata["decisions"].is_array());
    CHECK(est.metadata["decisions"].size() >= 1);
    const std::string text = est.metadata["decisions"][0].get<std::string>();
    CHECK(text.find("unstable") != std::string::npos);
}

// ---------------------------------------------------------------------------

namespace {
// Zero proportions 0.6 / 0.4 / 0.2 for sizes 50 / 100 / 200; unknown 0.3.
ArdSurvey bracket_survey() {
    ArdSurvey s;
    s.population_total = 1000;
    s.column_names = {"mid", "small", "big", "u"}; // deliberately unsorted
    s.known_size = {100, 50, 200, unknown_size};
    for (int i = 0; i < 10; ++i) {
        const int a = (i < 4) ? 0 : 2;  // mid: 4 zeros
        const int b = (i < 6) ? 0 : 1;  // small: 6 zeros
        const int c = (i < 2) ? 0 : 3;  // big: 2 zeros
        const int u = (i < 3) ? 0 : 1;  // unknown: 3 zeros
        s.responses.push_back({a, b, c, u});
    }
    return s;
}
} // namespace

TEST_CASE("zero-proportion bracketing") {
    const ArdSurvey s = bracket_survey();
    const JohnsenBracket br = johnsen_bounds(s, 3);
    CHECK(br.zero_proportion == Approx(0.3));
    // Sorted sizes 50, 100, 200 with proportions 0.6, 0.4, 0.2; the first
    // proportion below 0.3 sits at position 2, so the bracket is (100, 200).
    CHECK(br.ordering_position == 2);
    CHECK(br.lower == 100);
    CHECK(br.upper == 200);

    const SizeEstimate est = johnsen_estimate(s, 3);
    CHECK(est.point == Approx(150.0));
    CHECK(est.interval->first == 100.0);
    CHECK(est.interval->second == 200.0);
    CHECK(est.metadata["ordering_position"].get<int>() == 2);
}

TEST_CASE("bracketing edge positions") {
    ArdSurvey s = bracket_survey();
    // All-zero unknown column: proportion 1.0, larger than every known one.
    for (auto& row : s.responses) row[3] = 0;
    const JohnsenBracket lo = johnsen_bounds(s, 3);
    CHECK(lo.ordering_position == 0);
    CHECK(lo.lower == 0);
    CHECK(lo.upper == 50);

    // Unknown rarer than none: proportion below all -> bracket (200, N).
    for (std::size_t i = 0; i < s.responses.size(); ++i) s.responses[i][3] = 1;
    const JohnsenBracket hi = johnsen_bounds(s, 3);
    CHECK(hi.ordering_position == 3);
    CHECK(hi.lower == 200);
    CHECK(hi.upper == 1000);
}

TEST_CASE("bracketing demands strictly decreasing zero proportions") {
    ArdSurvey s = bracket_survey();
    // Make 'big' (size 200) have more zeros than 'mid' (size 100).
    for (int i = 0; i < 10; ++i) s.responses[i][2] = (i < 8) ? 0 : 3;
    CHECK_THROWS_WITH(johnsen_bounds(s, 3),
                      Catch::Matchers::ContainsSubstring("'mid'") &&
                      Catch::Matchers::ContainsSubstring("'big'") &&
                      Catch::Matchers::ContainsSubstring("strictly decreasing"));
}

TEST_CASE("bracketing refuses a known target") {
    const ArdSurvey s = bracket_survey();
    CHECK_THROWS_AS(johnsen_bounds(s, 0), ModelError);
}

// ---------------------------------------------------------------------------

TEST_CASE("generalised estimator recovers a census world exactly") {
    // Census frame (pi = 1) and census of hidden members: the identity
    //   point = sum(y_u) / mean(aware) holds without any rounding.
    ArdSurvey frame;
    frame.population_total = 6;
    frame.column_names = {"k", "u"};
    frame.known_size = {2, unknown_size};
    frame.responses = {{1, 1}, {0, 2}, {1, 0}, {2, 1}, {0, 0}, {1, 0}};

    EnrichedArd e;
    e.frame_total = 6;
    e.out_reports = {3, 2};
    e.aware_counts = {3, 1};  // sums to 4 = sum of y_u
    e.inclusion_probs = {1.0, 1.0};

    const auto [est, comp] = gnsum(frame, 1, e);
    CHECK(comp.numerator == 4.0);
    CHECK(comp.mean_visibility == 2.0);
    CHECK(est.point == 2.0); // exactly the two hidden members
}

TEST_CASE("generalised estimator weights by inclusion probabilities") {
    ArdSurvey frame;
    frame.population_total = 100;
    frame.column_names = {"k", "u"};
    frame.known_size = {10, unknown_size};
    frame.responses = {{1, 2}, {0, 1}};  // n = 2, default pi = 0.02

    EnrichedArd e;
    e.frame_total = 100;
    e.out_reports = {4, 6};
    e.aware_counts = {2, 6};
    e.inclusion_probs = {0.5, 0.25};

    const auto [est, comp] = gnsum(frame, 1, e);
    // numerator = (2+1)/0.02 = 150; visibility = (2/0.5 + 6/0.25)/(2 + 4) = 28/6.
    CHECK(comp.numerator == Approx(150.0));
    CHECK(comp.mean_visibility == Approx(28.0 / 6.0));
    CHECK(est.point == Approx(150.0 * 6.0 / 28.0));
    CHECK(est.metadata["decisions"].size() == 1);
}

TEST_CASE("generalised estimator error cases") {
    ArdSurvey frame;
    frame.population_total = 100;
    frame.column_names = {"k", "u"};
    frame.known_size = {10, unknown_size};
    frame.responses = {{1, 2}};

    EnrichedArd none;
    none.frame_total = 100;
    CHECK_THROWS_AS(gnsum(frame, 1, none), ModelError);

    EnrichedArd blind;
    blind.frame_total = 100;
    blind.out_reports = {3};
    blind.aware_counts = {0};
    blind.inclusion_probs = {1.0};
    CHECK_THROWS_WITH(gnsum(frame, 1, blind),
                      Catch::Matchers::ContainsSubstring("visibility is zero"));

    CHECK_THROWS_AS(gnsum(frame, 1, blind, {0.5, 0.5}), ModelError); // wrong length
}

TEST_CASE("estimator registry") {
    const ArdSurvey s = testutil::canonical_survey();
    CHECK(classic_estimator("pimle")(s, 2).point == Approx(30.0));
    CHECK(classic_estimator("wmos")(s, 2).point == Approx(45.0));
    CHECK(classic_method_labels().size() == 5);
    CHECK_THROWS_AS(classic_estimator("nope"), UsageError);
}
