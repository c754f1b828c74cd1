#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "scaleup/classic.hpp"
#include "scaleup/serialize.hpp"

using namespace scaleup;
using Catch::Approx;

TEST_CASE("estimate records round-trip through JSON with a stable key order") {
    const ArdSurvey s = testutil::canonical_survey();
    const SizeEstimate est = mle(s, 2);

    const Json j = estimate_to_json(est);
    const std::string text = j.dump();
    std::vector<std::string> keys = {"\"method\"", "\"point\"", "\"se\"",
                                     "\"ci\"",     "\"calibrations_applied\"", "\"metadata\""};
    std::size_t pos = 0;
    for (const auto& k : keys) {
        const std::size_t at = text.find(k);
        REQUIRE(at != std::string::npos);
        CHECK(at >= pos);
        pos = at;
    }

    const SizeEstimate back = estimate_from_json(j);
    CHECK(back.method == est.method);
    CHECK(back.point == est.point);
    REQUIRE(back.se.has_value());
    CHECK(*back.se == *est.se);
    REQUIRE(back.interval.has_value());
    CHECK(back.interval->first == est.interval->first);
    CHECK(back.interval->second == est.interval->second);
    CHECK(back.calibrations_applied == est.calibrations_applied);
    CHECK(back.metadata == est.metadata);
}

TEST_CASE("estimates without se or interval serialize those fields as null") {
    const ArdSurvey s = testutil::canonical_survey();
    const SizeEstimate est = pimle(s, 2);

    const Json j = estimate_to_json(est);
    CHECK(j.at("se").is_null());
    CHECK(j.at("ci").is_null());

    const SizeEstimate back = estimate_from_json(j);
    CHECK_FALSE(back.se.has_value());
    CHECK_FALSE(back.interval.has_value());
    CHECK(back.point == est.point);
}

TEST_CASE("malformed estimate records are rejected") {
    CHECK_THROWS_AS(estimate_from_json(Json::parse(R"({"point": 3})")), DataError);
    CHECK_THROWS_AS(estimate_from_json(Json::parse(R"([1, 2])")), DataError);
    CHECK_THROWS_AS(estimate_from_json(Json::parse(R"({"method": "mle", "point": 3, "ci": [1]})")),
                    DataError);
    CHECK_THROWS_AS(
        estimate_from_json(Json::parse(R"({"method": "mle", "point": 3, "ci": ["a", "b"]})")),
        DataError);
}

TEST_CASE("posterior draws round-trip through CSV bitwise") {
    PosteriorDraws d;
    d.param_names = {"N_u", "sigma"};
    // Awkward values: non-terminating binary fractions, huge, tiny, negative.
    d.values = {
        {{1.0 / 3.0, 0.1 + 0.2, 1e300}, {-2.5e-308, 400.0, 3.0000000000000004}},
        {{0.0, -0.0, 42.125}, {1e-17, 2.0 / 7.0, -15.75}},
    };

    const std::string csv = draws_to_csv(d);
    CHECK(csv.rfind("chain,iter,param,value\n", 0) == 0);

    const PosteriorDraws back = draws_from_csv(csv);
    REQUIRE(back.param_names == d.param_names);
    REQUIRE(back.n_chains() == 2);
    REQUIRE(back.draws_per_chain() == 3);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t t = 0; t < 3; ++t)
                CHECK(back.values[p][c][t] == d.values[p][c][t]);  // bitwise
}

TEST_CASE("malformed draws files are rejected") {
    CHECK_THROWS_AS(draws_from_csv("chain,iter,param\n0,0,x\n"), DataError);
    CHECK_THROWS_AS(draws_from_csv("chain,iter,param,value\n"), DataError);
    CHECK_THROWS_AS(draws_from_csv("chain,iter,param,value\n0,0,x\n"), DataError);
    // Ragged: parameter y appears in chain 0 only.
    CHECK_THROWS_AS(draws_from_csv("chain,iter,param,value\n"
                                   "0,0,x,1\n0,0,y,2\n1,0,x,3\n"),
                    DataError);
}

TEST_CASE("diagnostics render as a param,rhat,ess table") {
    PosteriorDraws d;
    d.param_names = {"N_u"};
    d.values = {{{5.0, 5.0, 5.0, 5.0}, {5.0, 5.0, 5.0, 5.0}}};
    const std::string csv = diagnostics_to_csv(diagnostics(d));
    CHECK(csv == "param,rhat,ess\nN_u,1,8\n");
}

TEST_CASE("leave-one-out tables render with the pinned five columns") {
    std::vector<LooRow> rows(2);
    rows[0].name = "alpha";
    rows[0].known_size = 500;
    rows[0].backestimate = 612.5;
    rows[0].ratio = 1.225;
    rows[0].log_ratio = std::log(1.225);
    rows[0].se_log = 0.04;  // deliberately absent from the CSV
    rows[1].name = "beta";
    rows[1].known_size = 800;
    rows[1].backestimate = 0.0;
    rows[1].ratio = 0.0;
    rows[1].log_ratio = -std::numeric_limits<double>::infinity();

    const std::string csv = loo_to_csv(rows);
    CHECK(csv == "subpop,known_size,backestimate,ratio,log_ratio\n"
                 "alpha,500,612.5,1.225," +
                     detail::format_double(std::log(1.225)) +
                     "\n"
                     "beta,800,0,0,-inf\n");
}

TEST_CASE("the trimming log keeps a per-round snapshot") {
    TrimResult trim;
    trim.survey.column_names = {"alpha", "beta", "hidden"};
    TrimRound round;
    round.removed_column = "gamma";
    round.log_ratio = 1.2;
    LooRow row;
    row.name = "gamma";
    row.known_size = 100;
    row.backestimate = 332.0;
    row.ratio = 3.32;
    row.log_ratio = 1.2;
    round.table = {row};
    trim.rounds = {round};

    const Json j = trim_log_to_json(trim);
    REQUIRE(j.at("rounds").size() == 1);
    CHECK(j.at("rounds")[0].at("removed_column") == "gamma");
    CHECK(j.at("rounds")[0].at("table")[0].at("subpop") == "gamma");
    CHECK(j.at("rounds")[0].at("table")[0].at("se_log").is_null());  // NaN becomes null
    CHECK(j.at("remaining_columns") ==
          Json(std::vector<std::string>{"alpha", "beta", "hidden"}));
}

TEST_CASE("benchmark cells render with empty fields for failures and missing intervals") {
    BenchmarkResult res;
    res.cells.resize(3);
    res.cells[0] = {"clean", "mle", 0, 400.0, 410.0, 0.025, true, ""};
    res.cells[1] = {"clean", "mos", 0, 400.0, 385.0, -0.0375, std::nullopt, ""};
    res.cells[2] = {"clean", "wmle", 0, 400.0,
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(), std::nullopt,
                    "wmle: survey carries no respondent weights"};

    CHECK(benchmark_to_csv(res) ==
          "scenario,estimator,replicate,point,truth,rel_error,covered\n"
          "clean,mle,0,410,400,0.025,1\n"
          "clean,mos,0,385,400,-0.0375,\n"
          "clean,wmle,0,,400,,\n");

    BenchmarkSummary sum;
    sum.scenario = "clean";
    sum.estimator = "wmle";
    sum.replicates = 1;
    sum.failures = 1;
    res.summaries = {sum};
    const Json j = benchmark_summaries_to_json(res);
    CHECK(j[0].at("failures") == 1);
    CHECK(j[0].at("median_rel_error").is_null());
    CHECK(j[0].at("coverage").is_null());
}

TEST_CASE("the manifest fingerprints configuration and outputs") {
    Json config = Json::object();
    config["method"] = "mle";
    config["seed"] = 42;

    RunManifest m = make_manifest("scaleup estimate --method mle --seed 42", config, 42);
    CHECK(m.config_digest.size() == 16);
    CHECK(m.versions.at("scaleup") == SCALEUP_VERSION);
    CHECK_FALSE(m.generated_at.has_value());

    // Same configuration, same digest; any flag change moves it.
    CHECK(make_manifest("x", config, 42).config_digest == m.config_digest);
    Json other = config;
    other["seed"] = 43;
    CHECK(make_manifest("x", other, 43).config_digest != m.config_digest);

    manifest_record_output(m, "estimate.json", "{\"point\": 30}");
    manifest_record_output(m, "draws.csv", "chain,iter,param,value\n");
    REQUIRE(m.outputs.size() == 2);
    CHECK(m.outputs[0].first == "estimate.json");
    CHECK(m.outputs[0].second == content_digest("{\"point\": 30}"));
    CHECK(content_digest("a") != content_digest("b"));
    CHECK(content_digest("a") == content_digest("a"));

    const Json j = manifest_to_json(m);
    CHECK(j.at("command") == "scaleup estimate --method mle --seed 42");
    CHECK(j.at("seed") == 42);
    CHECK(j.at("generated_at").is_null());
    REQUIRE(j.at("outputs").size() == 2);
    CHECK(j.at("outputs")[1].at("path") == "draws.csv");
}
