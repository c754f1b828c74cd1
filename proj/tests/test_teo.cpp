#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "scaleup/model_teo.hpp"

using namespace scaleup;
using Catch::Approx;

namespace {

struct TeoWorld {
    double lambda = 140.0;
    double sigma_alpha = 0.5;
    long long population = 20000;
    std::vector<std::string> cols = {"club", "choir", "league", "hidden"};
    std::vector<long long> sizes = {600, 1200, 900, 350};
    std::vector<double> slopes = {0.5, 0.0, 0.8, 0.8};  // per-column recall slope
    std::vector<double> cov_effects = {0.0, 0.0, 0.0, 0.0};
    int scale_top = 5;
    std::size_t n = 120;
};

// Draw a survey straight from the rate model itself.
ArdSurvey teo_survey(const TeoWorld& w, bool with_covariate, std::uint64_t seed) {
    Rng rng = make_rng(seed, "teo-world");
    ArdSurvey s;
    s.population_total = w.population;
    s.column_names = w.cols;
    for (std::size_t k = 0; k < w.cols.size(); ++k)
        s.known_size.push_back(w.cols[k] == "hidden" ? unknown_size : w.sizes[k]);
    s.responses.assign(w.n, std::vector<int>(w.cols.size(), 0));
    s.likert.assign(w.n, std::vector<int>(w.cols.size(), 0));
    s.likert_upper.assign(w.cols.size(), w.scale_top);
    if (with_covariate) {
        s.covariate_names = {"contact"};
        s.covariates.assign(w.n, {0.0});
    }
    for (std::size_t i = 0; i < w.n; ++i) {
        s.respondent_ids.push_back("r" + std::to_string(i));
        const double alpha =
            std::exp(rnorm(rng, -0.5 * w.sigma_alpha * w.sigma_alpha, w.sigma_alpha));
        const double z = with_covariate ? rnorm(rng) : 0.0;
        if (with_covariate) s.covariates[i][0] = z;
        for (std::size_t k = 0; k < w.cols.size(); ++k) {
            const int x = static_cast<int>(runif_int(rng, 0, w.scale_top));
            s.likert[i][k] = x;
            const double prev = static_cast<double>(w.sizes[k]) / w.population;
            double lr = std::log(w.lambda * alpha * prev) + w.slopes[k] * (x - w.scale_top);
            if (with_covariate) lr += w.cov_effects[k] * z;
            s.responses[i][k] = static_cast<int>(rpois(rng, std::exp(lr)));
        }
    }
    return s;
}

McmcConfig teo_run(std::uint64_t seed) {
    McmcConfig cfg;
    cfg.chains = 2;
    cfg.burnin = 600;
    cfg.keep = 400;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("rate model requires ordinal scores with bounds") {
    TeoWorld w;
    ArdSurvey s = teo_survey(w, false, 1);
    const std::size_t u = s.column_index("hidden");
    McmcConfig tiny;
    tiny.chains = 1;
    tiny.burnin = 5;
    tiny.keep = 5;

    ArdSurvey no_scores = s;
    no_scores.likert.clear();
    no_scores.likert_upper.clear();
    CHECK_THROWS_WITH(fit_teo(no_scores, u, TeoVariant::plain, tiny),
                      Catch::Matchers::ContainsSubstring("ordinal recall"));

    ArdSurvey no_bound = s;
    no_bound.likert_upper[1] = 0;
    for (auto& row : no_bound.likert) row[1] = missing_response;
    CHECK_THROWS_WITH(fit_teo(no_bound, u, TeoVariant::plain, tiny),
                      Catch::Matchers::ContainsSubstring("choir"));

    CHECK_THROWS_WITH(fit_teo(s, u, TeoVariant::covariate, tiny),
                      Catch::Matchers::ContainsSubstring("covariates"));
    CHECK_THROWS_AS(fit_teo(s, s.column_index("club"), TeoVariant::plain, tiny), ModelError);
    CHECK(teo_variant_label(TeoVariant::plain) == "teo");
    CHECK(teo_variant_label(TeoVariant::covariate) == "teo-barrier");
}

TEST_CASE("rate model recovers slopes sizes and scale") {
    TeoWorld w;
    const ArdSurvey s = teo_survey(w, false, 14);
    const std::size_t u = s.column_index("hidden");
    const PosteriorDraws d = fit_teo(s, u, TeoVariant::plain, teo_run(41));

    CHECK(d.has("lambda"));
    CHECK(d.has("alpha[r0]"));
    CHECK(d.has("sigma_alpha"));
    CHECK(d.has("N_u"));

    // Slope signs separate: the flat column stays near zero, the steep
    // hidden column comes back clearly positive.
    CHECK(median(d.merged("beta[choir]")) == Approx(0.0).margin(0.25));
    CHECK(median(d.merged("beta[hidden]")) > 0.35);
    CHECK(median(d.merged("beta[club]")) > 0.15);

    const double nu_med = median(d.merged("N_u"));
    CHECK(nu_med > 350.0 * 0.55);
    CHECK(nu_med < 350.0 / 0.55);
    CHECK(median(d.merged("lambda")) == Approx(140.0).epsilon(0.45));
    CHECK(median(d.merged("sigma_alpha")) == Approx(0.5).margin(0.25));

    // Gregariousness factors hover around one.
    std::vector<double> alpha_meds;
    for (std::size_t i = 0; i < s.n(); ++i)
        alpha_meds.push_back(median(d.merged("alpha[" + s.respondent_ids[i] + "]")));
    CHECK(median(alpha_meds) == Approx(1.0).epsilon(0.3));

    // Deterministic rerun.
    const PosteriorDraws d2 = fit_teo(s, u, TeoVariant::plain, teo_run(41));
    CHECK(d.values == d2.values);
    for (const std::string block : {"alpha", "beta", "lambda", "sigma_alpha", "N_u"})
        REQUIRE(d.acceptance.count(block) == 1);
    CHECK(d.acceptance.count("gamma") == 0);
}

TEST_CASE("covariate variant finds the covariate effect") {
    TeoWorld w;
    w.cov_effects = {0.0, 0.0, 0.0, 0.7};
    const ArdSurvey s = teo_survey(w, true, 15);
    const std::size_t u = s.column_index("hidden");
    const PosteriorDraws d = fit_teo(s, u, TeoVariant::covariate, teo_run(42));

    CHECK(d.has("gamma[contact][hidden]"));
    CHECK(median(d.merged("gamma[contact][hidden]")) > 0.3);
    CHECK(median(d.merged("gamma[contact][choir]")) == Approx(0.0).margin(0.3));
    REQUIRE(d.acceptance.count("gamma") == 1);
    for (double r : d.acceptance.at("gamma")) CHECK(r > 0.1);

    const double nu_med = median(d.merged("N_u"));
    CHECK(nu_med > 350.0 * 0.5);
    CHECK(nu_med < 350.0 / 0.5);
}

TEST_CASE("unscored cells drop out of the likelihood") {
    TeoWorld w;
    ArdSurvey s = teo_survey(w, false, 16);
    const std::size_t u = s.column_index("hidden");
    // Blank a third of the hidden column's scores.
    for (std::size_t i = 0; i < s.n(); i += 3) s.likert[i][u] = missing_response;
    REQUIRE(validate(s).ok());

    McmcConfig mc;
    mc.chains = 1;
    mc.burnin = 150;
    mc.keep = 100;
    mc.seed = 4;
    const PosteriorDraws d = fit_teo(s, u, TeoVariant::plain, mc);
    const double nu_med = median(d.merged("N_u"));
    CHECK(std::isfinite(nu_med));
    CHECK(nu_med > 0.0);
    CHECK(nu_med < 20000.0);
}
