#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scaleup/classic.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/numerics.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// Poisson rate model driven by ordinal recall scores: respondents rate how
// well they know each group on a bounded scale, and the expected report is
//
//   E y_ik = lambda * alpha_i * (N_k / N) * exp(beta_k (x_ik - U_k))
//
// with x_ik the ordinal score and U_k the top of its scale, so a respondent
// at the top of the scale reports at the unattenuated rate.  alpha_i is a
// mean-one lognormal gregariousness factor (log alpha_i ~ N(-sigma^2/2,
// sigma^2)), lambda the average network scale.  The covariate-adjusted
// variant multiplies the rate by exp(sum_j gamma_jk z_ij) with respondent
// covariates z centred per coordinate.  The unknown size has a flat prior
// on (0, N).

namespace scaleup {

enum class TeoVariant { plain, covariate };

inline std::string teo_variant_label(TeoVariant v) {
    return v == TeoVariant::plain ? "teo" : "teo-barrier";
}

struct TeoPriors {
    double log_lambda_sd = 10.0;  // diffuse lognormal prior on the scale
    double beta_sd = 2.0;         // normal prior on recall slopes
    double gamma_sd = 2.0;        // normal prior on covariate effects
    double sigma_alpha_scale = 1.0;  // half-normal prior on sigma_alpha
};

namespace detail {

class TeoModel {
public:
    TeoModel(const ArdSurvey& s, std::size_t ucol, TeoVariant variant, const TeoPriors& priors,
             Rng& init)
        : s_(s), pr_(priors), with_cov_(variant == TeoVariant::covariate) {
        for (std::size_t k : s.known_columns()) used_.push_back(k);
        used_.push_back(ucol);
        upos_ = used_.size() - 1;

        if (s.likert.empty())
            throw ModelError("the rate model needs ordinal recall scores for every respondent; "
                             "the survey has none");
        for (std::size_t c = 0; c < used_.size(); ++c)
            if (s.likert_upper[used_[c]] <= 0)
                throw ModelError("the rate model needs an ordinal scale bound for column '" +
                                 s.column_names[used_[c]] + "'");
        if (with_cov_) {
            if (s.covariates.empty())
                throw ModelError("the covariate-adjusted rate model needs respondent "
                                 "covariates; the survey has none");
            // Centre each coordinate so the intercept stays in lambda.
            z_ = s.covariates;
            for (std::size_t j = 0; j < s.covariate_names.size(); ++j) {
                double m = 0.0;
                for (std::size_t i = 0; i < s.n(); ++i) m += z_[i][j];
                m /= static_cast<double>(s.n());
                for (std::size_t i = 0; i < s.n(); ++i) z_[i][j] -= m;
            }
        }

        const std::size_t n = s.n();
        N_ = static_cast<double>(s.population_total);

        double start = N_ * 0.01;
        try {
            start = mle(s, ucol).point;
        } catch (const ModelError&) {
        }
        start = std::min(std::max(start, 1.0), 0.5 * N_);
        log_nu_ = std::log(start) + rnorm(init, 0.0, 0.2);

        // Scale: average reports against prevalence mass, everything else
        // at its prior centre.
        double ybar = 0.0, mass = 0.0;
        std::size_t cells = 0;
        for (std::size_t c = 0; c < used_.size(); ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const int y = s.responses[i][used_[c]];
                if (y == missing_response) continue;
                ybar += y;
                mass += prevalence(c, std::exp(log_nu_));
                ++cells;
            }
        }
        loglam_ = std::log(std::max(1.0, cells > 0 ? ybar / std::max(mass, 1e-12) : 1.0)) +
                  rnorm(init, 0.0, 0.2);

        logalpha_.assign(n, 0.0);
        for (double& a : logalpha_) a = rnorm(init, 0.0, 0.1);
        sigma_a_ = 0.5 * std::exp(rnorm(init, 0.0, 0.2));
        beta_.assign(used_.size(), 0.0);
        for (double& b : beta_) b = rnorm(init, 0.0, 0.1);
        if (with_cov_)
            gamma_.assign(s.covariate_names.size(), std::vector<double>(used_.size(), 0.0));
        for (auto& row : gamma_)
            for (double& g : row) g = rnorm(init, 0.0, 0.1);

        alpha_sc_.assign(n, AdaptiveScale{0.5});
        beta_sc_.assign(used_.size(), AdaptiveScale{0.3});
        gamma_sc_.assign(gamma_.size(), std::vector<AdaptiveScale>(used_.size(), AdaptiveScale{0.3}));
        lam_sc_ = AdaptiveScale{0.2};
        sig_sc_ = AdaptiveScale{0.4};
        nu_sc_ = AdaptiveScale{0.4};

        names_.push_back("lambda");
        for (std::size_t i = 0; i < n; ++i)
            names_.push_back("alpha[" + s.respondent_label(i) + "]");
        names_.push_back("sigma_alpha");
        for (std::size_t c = 0; c < used_.size(); ++c)
            names_.push_back("beta[" + s.column_names[used_[c]] + "]");
        for (std::size_t j = 0; j < gamma_.size(); ++j)
            for (std::size_t c = 0; c < used_.size(); ++c)
                names_.push_back("gamma[" + s.covariate_names[j] + "][" +
                                 s.column_names[used_[c]] + "]");
        names_.push_back("N_u");
    }

    const std::vector<std::string>& param_names() const { return names_; }

    void sweep(Rng& rng, bool adapting) {
        update_alphas(rng, adapting);
        update_sigma(rng, adapting);
        update_lambda(rng, adapting);
        update_betas(rng, adapting);
        if (with_cov_) update_gammas(rng, adapting);
        update_size(rng, adapting);
    }

    void snapshot(std::vector<double>& out) const {
        out.clear();
        out.push_back(std::exp(loglam_));
        for (double a : logalpha_) out.push_back(std::exp(a));
        out.push_back(sigma_a_);
        for (double b : beta_) out.push_back(b);
        for (const auto& row : gamma_)
            for (double g : row) out.push_back(g);
        out.push_back(std::exp(log_nu_));
    }

    std::map<std::string, double> acceptance() const {
        std::map<std::string, double> out;
        out["alpha"] = pooled(alpha_sc_);
        out["sigma_alpha"] = sig_sc_.rate();
        out["lambda"] = lam_sc_.rate();
        out["beta"] = pooled(beta_sc_);
        out["N_u"] = nu_sc_.rate();
        if (with_cov_) {
            double acc = 0.0, att = 0.0;
            for (const auto& row : gamma_sc_)
                for (const auto& sc : row) { acc += sc.accepted; att += sc.attempted; }
            out["gamma"] = att > 0 ? acc / att : 0.0;
        }
        return out;
    }

private:
    static double pooled(const std::vector<AdaptiveScale>& v) {
        double acc = 0.0, att = 0.0;
        for (const auto& sc : v) { acc += sc.accepted; att += sc.attempted; }
        return att > 0 ? acc / att : 0.0;
    }

    double prevalence(std::size_t c, double nu) const {
        return c == upos_ ? nu / N_
                          : static_cast<double>(s_.known_size[used_[c]]) / N_;
    }

    double log_rate(std::size_t i, std::size_t c, double loglam, double logalpha, double beta,
                    double nu) const {
        const std::size_t k = used_[c];
        double lr = loglam + logalpha + std::log(prevalence(c, nu)) +
                    beta * (s_.likert[i][k] - s_.likert_upper[k]);
        if (with_cov_)
            for (std::size_t j = 0; j < gamma_.size(); ++j) lr += gamma_[j][c] * z_[i][j];
        return lr;
    }

    double cell_loglik(std::size_t i, std::size_t c, double loglam, double logalpha, double beta,
                       double nu) const {
        const int y = s_.responses[i][used_[c]];
        if (y == missing_response) return 0.0;
        if (s_.likert[i][used_[c]] == missing_response) return 0.0;  // unscored cell
        const double lr = log_rate(i, c, loglam, logalpha, beta, nu);
        return y * lr - std::exp(lr) - std::lgamma(static_cast<double>(y) + 1.0);
    }

    void update_alphas(Rng& rng, bool adapting) {
        const double nu = std::exp(log_nu_);
        for (std::size_t i = 0; i < s_.n(); ++i) {
            auto target = [&](double a) {
                double acc = log_normal_pdf(a, -0.5 * sigma_a_ * sigma_a_, sigma_a_);
                for (std::size_t c = 0; c < used_.size(); ++c)
                    acc += cell_loglik(i, c, loglam_, a, beta_[c], nu);
                return acc;
            };
            const double cur = target(logalpha_[i]);
            mh_normal(rng, logalpha_[i], alpha_sc_[i], cur, target);
            if (adapting) alpha_sc_[i].maybe_adapt(0.35, 25);
        }
    }

    void update_sigma(Rng& rng, bool adapting) {
        auto target = [&](double t) {
            const double sg = std::exp(t);
            if (sg > 20.0) return neg_inf;
            // half-normal prior on sigma, log-scale Jacobian
            double acc = -0.5 * (sg / pr_.sigma_alpha_scale) * (sg / pr_.sigma_alpha_scale) + t;
            for (double a : logalpha_) acc += log_normal_pdf(a, -0.5 * sg * sg, sg);
            return acc;
        };
        double t = std::log(sigma_a_);
        const double cur = target(t);
        mh_normal(rng, t, sig_sc_, cur, target);
        sigma_a_ = std::exp(t);
        if (adapting) sig_sc_.maybe_adapt(0.35, 25);
    }

    void update_lambda(Rng& rng, bool adapting) {
        const double nu = std::exp(log_nu_);
        auto target = [&](double l) {
            double acc = log_normal_pdf(l, 0.0, pr_.log_lambda_sd);
            for (std::size_t i = 0; i < s_.n(); ++i)
                for (std::size_t c = 0; c < used_.size(); ++c)
                    acc += cell_loglik(i, c, l, logalpha_[i], beta_[c], nu);
            return acc;
        };
        const double cur = target(loglam_);
        mh_normal(rng, loglam_, lam_sc_, cur, target);
        if (adapting) lam_sc_.maybe_adapt(0.35, 25);
    }

    void update_betas(Rng& rng, bool adapting) {
        const double nu = std::exp(log_nu_);
        for (std::size_t c = 0; c < used_.size(); ++c) {
            auto target = [&](double b) {
                double acc = log_normal_pdf(b, 0.0, pr_.beta_sd);
                for (std::size_t i = 0; i < s_.n(); ++i)
                    acc += cell_loglik(i, c, loglam_, logalpha_[i], b, nu);
                return acc;
            };
            const double cur = target(beta_[c]);
            mh_normal(rng, beta_[c], beta_sc_[c], cur, target);
            if (adapting) beta_sc_[c].maybe_adapt(0.35, 25);
        }
    }

    void update_gammas(Rng& rng, bool adapting) {
        const double nu = std::exp(log_nu_);
        for (std::size_t j = 0; j < gamma_.size(); ++j)
            for (std::size_t c = 0; c < used_.size(); ++c) {
                auto target = [&](double g) {
                    const double keep = gamma_[j][c];
                    gamma_[j][c] = g;
                    double acc = log_normal_pdf(g, 0.0, pr_.gamma_sd);
                    for (std::size_t i = 0; i < s_.n(); ++i)
                        acc += cell_loglik(i, c, loglam_, logalpha_[i], beta_[c], nu);
                    gamma_[j][c] = keep;
                    return acc;
                };
                const double cur = target(gamma_[j][c]);
                double g = gamma_[j][c];
                mh_normal(rng, g, gamma_sc_[j][c], cur, target);
                gamma_[j][c] = g;
                if (adapting) gamma_sc_[j][c].maybe_adapt(0.35, 25);
            }
    }

    void update_size(Rng& rng, bool adapting) {
        auto target = [&](double x) {
            const double nu = std::exp(x);
            if (nu >= N_) return neg_inf;
            double acc = x;  // flat prior on N_u, log scale
            for (std::size_t i = 0; i < s_.n(); ++i)
                acc += cell_loglik(i, upos_, loglam_, logalpha_[i], beta_[upos_], nu);
            return acc;
        };
        const double cur = target(log_nu_);
        mh_normal(rng, log_nu_, nu_sc_, cur, target);
        if (adapting) nu_sc_.maybe_adapt(0.35, 25);
    }

    const ArdSurvey& s_;
    TeoPriors pr_;
    bool with_cov_ = false;
    std::vector<std::size_t> used_;
    std::size_t upos_ = 0;
    double N_ = 0.0;

    std::vector<std::vector<double>> z_;  // centred covariates
    std::vector<double> logalpha_, beta_;
    std::vector<std::vector<double>> gamma_;  // [covariate][column]
    double loglam_ = 0.0, sigma_a_ = 0.5, log_nu_ = 0.0;

    std::vector<AdaptiveScale> alpha_sc_, beta_sc_;
    std::vector<std::vector<AdaptiveScale>> gamma_sc_;
    AdaptiveScale lam_sc_, sig_sc_, nu_sc_;
    std::vector<std::string> names_;
};

} // namespace detail

inline PosteriorDraws fit_teo(const ArdSurvey& s, std::size_t ucol,
                              TeoVariant variant = TeoVariant::plain, const McmcConfig& cfg = {},
                              const TeoPriors& priors = {}) {
    require_valid(s);
    if (ucol >= s.k()) throw ModelError("no such column");
    if (s.is_known(ucol))
        throw ModelError("'" + s.column_names[ucol] + "' already has a known size");
    if (s.known_columns().empty())
        throw ModelError("rate scaling needs at least one known column");
    return run_chains(cfg, [&](std::size_t, Rng& init) {
        return detail::TeoModel(s, ucol, variant, priors, init);
    });
}

} // namespace scaleup
