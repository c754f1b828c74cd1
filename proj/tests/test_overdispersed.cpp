#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "scaleup/model_overdispersed.hpp"
#include "scaleup/simulate.hpp"

using namespace scaleup;
using Catch::Approx;

namespace {

ArdSurvey overdispersed_survey(std::uint64_t seed = 77) {
    WorldConfig cfg;
    cfg.population_total = 20000;
    cfg.subpops = {{"alpha", 400, true},
                   {"beta", 800, true},
                   {"gamma", 1500, true},
                   {"hidden", 400, false}};
    cfg.degree.kind = DegreeModel::Kind::lognormal;
    cfg.degree.mu = 4.6;
    cfg.degree.sigma = 0.6;
    cfg.mixing.kind = MixingModel::Kind::overdispersed;
    cfg.mixing.omega = {{"alpha", 1.5}, {"beta", 2.5}, {"gamma", 1.2}, {"hidden", 2.0}};
    cfg.sample_size = 150;
    cfg.seed = seed;
    return generate_ard(generate_world(cfg)).survey;
}

// Pull one sweep's parameter vector out of the stored draws.
struct DrawView {
    std::vector<double> alpha, beta, omega;
};

DrawView extract_draw(const PosteriorDraws& d, const ArdSurvey& s, std::size_t chain,
                      std::size_t m) {
    DrawView v;
    for (std::size_t i = 0; i < s.n(); ++i)
        v.alpha.push_back(d.values[d.index("alpha[" + std::to_string(i) + "]")][chain][m]);
    for (std::size_t k = 0; k < s.k(); ++k) {
        v.beta.push_back(d.values[d.index("beta[" + s.column_names[k] + "]")][chain][m]);
        v.omega.push_back(d.values[d.index("omega[" + s.column_names[k] + "]")][chain][m]);
    }
    return v;
}

}  // namespace

TEST_CASE("count model log likelihood sums the observed cells") {
    ArdSurvey s;
    s.population_total = 1000;
    s.column_names = {"a", "b"};
    s.known_size = {100, unknown_size};
    s.respondent_ids = {"r1", "r2"};
    s.responses = {{3, 5}, {2, missing_response}};

    const std::vector<double> alpha = {1.0, 0.5};
    const std::vector<double> beta = {-0.5, 0.3};
    const std::vector<double> omega = {1.0, 2.0};
    double expect = 0.0;
    expect += log_nb1_pmf(3, std::exp(1.0 - 0.5), 1.0);
    expect += log_nb1_pmf(5, std::exp(1.0 + 0.3), 2.0);
    expect += log_nb1_pmf(2, std::exp(0.5 - 0.5), 1.0);
    CHECK(overdispersed_loglik(s, alpha, beta, omega) == Approx(expect).epsilon(1e-12));
}

TEST_CASE("overdispersed fit recovers sizes and dispersion ordering") {
    const ArdSurvey s = overdispersed_survey();
    McmcConfig cfg;
    cfg.chains = 2;
    cfg.burnin = 500;
    cfg.keep = 400;
    cfg.seed = 31;

    const PosteriorDraws raw = fit_overdispersed(s, cfg);
    CHECK(raw.n_chains() == 2);
    CHECK(raw.draws_per_chain() == 400);

    // Determinism: rerunning the fit reproduces every draw.
    const PosteriorDraws again = fit_overdispersed(s, cfg);
    CHECK(raw.values == again.values);

    const PosteriorDraws renorm = renormalize_betas(raw, s);
    const PosteriorDraws sized = overdispersed_size_draws(renorm, s, s.column_index("hidden"));

    // After renormalisation the known columns' prevalences sum correctly
    // in every single draw.
    const double prevalence = (400.0 + 800.0 + 1500.0) / 20000.0;
    for (std::size_t c = 0; c < renorm.n_chains(); ++c)
        for (std::size_t m = 0; m < renorm.draws_per_chain(); m += 97) {
            double sum = 0.0;
            for (const std::string col : {"alpha", "beta", "gamma"})
                sum += std::exp(renorm.values[renorm.index("beta[" + col + "]")][c][m]);
            CHECK(sum == Approx(prevalence).epsilon(1e-12));
        }

    // The shift is likelihood-invariant.
    for (const std::size_t m : {std::size_t{0}, std::size_t{399}}) {
        const DrawView before = extract_draw(raw, s, 0, m);
        const DrawView after = extract_draw(renorm, s, 0, m);
        const double lb = overdispersed_loglik(s, before.alpha, before.beta, before.omega);
        const double la = overdispersed_loglik(s, after.alpha, after.beta, after.omega);
        CHECK(std::abs(la - lb) <= 1e-8 * std::max(1.0, std::abs(lb)));
        for (std::size_t k = 0; k < s.k(); ++k) CHECK(after.omega[k] == before.omega[k]);
    }

    // Size recovery: generous band, this is a small survey.
    const std::vector<double> nu = sized.merged("N_u");
    const double med = median(nu);
    CHECK(med > 400.0 * 0.6);
    CHECK(med < 400.0 / 0.6);
    const SizeEstimate est = posterior_size(sized, "overdispersed");
    CHECK(est.point == Approx(med));
    CHECK(est.interval->first < est.point);
    CHECK(est.interval->second > est.point);

    // Dispersion ordering: the omega = 2.5 column sits above the 1.2 one.
    const double om_beta = median(renorm.merged("omega[beta]"));
    const double om_gamma = median(renorm.merged("omega[gamma]"));
    CHECK(om_beta > om_gamma);
    CHECK(om_beta > 1.3);

    // Acceptance bookkeeping is present for every block and chain.
    for (const std::string block : {"alpha", "beta", "omega", "shift"}) {
        REQUIRE(raw.acceptance.count(block) == 1);
        CHECK(raw.acceptance.at(block).size() == 2);
    }
    // Adapted random-walk blocks should sit near the target rate.
    for (const std::string block : {"alpha", "beta", "omega"}) {
        for (double r : raw.acceptance.at(block)) {
            CHECK(r > 0.15);
            CHECK(r < 0.6);
        }
    }
}

TEST_CASE("near-Poisson data pushes the dispersion posterior to its floor") {
    WorldConfig cfg;
    cfg.population_total = 20000;
    cfg.subpops = {{"alpha", 600, true}, {"beta", 1200, true}, {"hidden", 300, false}};
    cfg.degree.kind = DegreeModel::Kind::lognormal;
    cfg.degree.mu = 4.6;
    cfg.degree.sigma = 0.5;
    cfg.sample_size = 150;
    cfg.seed = 99;
    const ArdSurvey s = generate_ard(generate_world(cfg)).survey;

    McmcConfig mc;
    mc.chains = 1;
    mc.burnin = 400;
    mc.keep = 300;
    mc.seed = 7;
    const PosteriorDraws d = fit_overdispersed(s, mc);
    for (const std::string col : {"alpha", "beta", "hidden"}) {
        const double om = median(d.merged("omega[" + col + "]"));
        CHECK(om >= 1.0);
        CHECK(om < 1.6);
    }
}

TEST_CASE("overdispersed model rejects unusable inputs") {
    ArdSurvey s;
    s.population_total = 1000;
    s.column_names = {"u"};
    s.known_size = {unknown_size};
    s.respondent_ids = {"r1"};
    s.responses = {{2}};
    CHECK_THROWS_AS(fit_overdispersed(s), ModelError);

    const ArdSurvey good = overdispersed_survey();
    McmcConfig tiny;
    tiny.chains = 1;
    tiny.burnin = 10;
    tiny.keep = 5;
    const PosteriorDraws d = fit_overdispersed(good, tiny);
    CHECK_THROWS_AS(renormalize_betas(d, good, {good.column_index("hidden")}), ModelError);
    CHECK_THROWS_AS(overdispersed_size_draws(d, good, good.column_index("alpha")), ModelError);
    CHECK_NOTHROW(overdispersed_size_draws(d, good, good.column_index("hidden")));
}
