#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scaleup/classic.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/numerics.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// Overdispersed count model: y_ik is negative-binomial with mean
// exp(alpha_i + beta_k) and variance omega_k times the mean, so omega_k = 1
// recovers the Poisson and larger omega_k captures how unevenly
// subpopulation k spreads across respondents' networks.
//
// alpha_i ~ N(mu_alpha, sigma_alpha^2), beta_k ~ N(mu_beta, sigma_beta^2),
// and 1/omega_k is uniform on (0,1).  Only alpha + beta is likelihood-
// identified; the reported scale is fixed afterwards by renormalising the
// betas of a set of rare known subpopulations against their true size
// fractions (hyperparameters are left untouched by that shift).

namespace scaleup {

struct OverdispersedPriors {
    double mu_alpha_mean = 0.0, mu_alpha_sd = 5.0;
    double mu_beta_mean = 0.0, mu_beta_sd = 5.0;
    double sigma2_shape = 2.0, sigma2_scale = 1.0;  // inverse-gamma for both variances
};

inline double overdispersed_loglik(const ArdSurvey& s, const std::vector<double>& alpha,
                                   const std::vector<double>& beta,
                                   const std::vector<double>& omega) {
    double ll = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i)
        for (std::size_t k = 0; k < s.k(); ++k) {
            if (s.is_missing(i, k)) continue;
            ll += log_nb1_pmf(s.responses[i][k], std::exp(alpha[i] + beta[k]), omega[k]);
        }
    return ll;
}

namespace detail {

class OverdispersedModel {
public:
    OverdispersedModel(const ArdSurvey& s, const OverdispersedPriors& priors, Rng& init_rng)
        : s_(&s), pr_(priors), n_(s.n()), K_(s.k()),
          alpha_(n_), beta_(K_), t_(K_),
          alpha_sc_(n_, AdaptiveScale{0.5}), beta_sc_(K_, AdaptiveScale{0.3}),
          omega_sc_(K_, AdaptiveScale{0.5}), shift_sc_{0.3} {
        const DegreeEstimates deg = pimle_degrees(s);
        for (std::size_t i = 0; i < n_; ++i)
            alpha_[i] = std::log(std::max(1.0, deg.values[i])) + rnorm(init_rng, 0.0, 0.2);
        const SurveySummary sum = summarize(s);
        double abar = 0.0;
        for (double a : alpha_) abar += a / static_cast<double>(n_);
        for (std::size_t k = 0; k < K_; ++k) {
            beta_[k] = std::log(std::max(0.1, sum.columns[k].mean)) - abar +
                       rnorm(init_rng, 0.0, 0.2);
            double om = 1.5;
            if (sum.columns[k].mean > 0.0)
                om = std::clamp(sum.columns[k].variance / sum.columns[k].mean, 1.05, 50.0);
            t_[k] = std::log(om - 1.0) + rnorm(init_rng, 0.0, 0.2);
        }
        mu_alpha_ = abar;
        sigma_alpha_ = std::max(0.5, sample_sd(alpha_));
        mu_beta_ = 0.0;
        for (double b : beta_) mu_beta_ += b / static_cast<double>(K_);
        sigma_beta_ = std::max(0.5, sample_sd(beta_));

        names_.reserve(n_ + 2 * K_ + 4);
        for (std::size_t i = 0; i < n_; ++i) names_.push_back("alpha[" + std::to_string(i) + "]");
        for (std::size_t k = 0; k < K_; ++k) names_.push_back("beta[" + s.column_names[k] + "]");
        for (std::size_t k = 0; k < K_; ++k) names_.push_back("omega[" + s.column_names[k] + "]");
        names_.push_back("mu_alpha");
        names_.push_back("sigma_alpha");
        names_.push_back("mu_beta");
        names_.push_back("sigma_beta");
    }

    const std::vector<std::string>& param_names() const { return names_; }

    void sweep(Rng& rng, bool adapting) {
        // alpha_i: row likelihood + normal prior
        for (std::size_t i = 0; i < n_; ++i) {
            const double cur = row_loglik(i, alpha_[i]) +
                               log_normal_pdf(alpha_[i], mu_alpha_, sigma_alpha_);
            mh_normal(rng, alpha_[i], alpha_sc_[i], cur, [&](double a) {
                return row_loglik(i, a) + log_normal_pdf(a, mu_alpha_, sigma_alpha_);
            });
            if (adapting) alpha_sc_[i].maybe_adapt(0.35, 25);
        }
        // beta_k: column likelihood + normal prior
        for (std::size_t k = 0; k < K_; ++k) {
            const double cur = col_loglik(k, beta_[k], t_[k]) +
                               log_normal_pdf(beta_[k], mu_beta_, sigma_beta_);
            mh_normal(rng, beta_[k], beta_sc_[k], cur, [&](double b) {
                return col_loglik(k, b, t_[k]) + log_normal_pdf(b, mu_beta_, sigma_beta_);
            });
            if (adapting) beta_sc_[k].maybe_adapt(0.35, 25);
        }
        // t_k = log(omega_k - 1): column likelihood + prior 1/omega^2 + Jacobian
        for (std::size_t k = 0; k < K_; ++k) {
            const double cur = col_loglik(k, beta_[k], t_[k]) + omega_logprior(t_[k]);
            mh_normal(rng, t_[k], omega_sc_[k], cur, [&](double t) {
                return col_loglik(k, beta_[k], t) + omega_logprior(t);
            });
            if (adapting) omega_sc_[k].maybe_adapt(0.35, 25);
        }
        gibbs_hypers(rng);
        shift_move(rng, adapting);
    }

    void snapshot(std::vector<double>& out) const {
        out.resize(names_.size());
        std::size_t p = 0;
        for (std::size_t i = 0; i < n_; ++i) out[p++] = alpha_[i];
        for (std::size_t k = 0; k < K_; ++k) out[p++] = beta_[k];
        for (std::size_t k = 0; k < K_; ++k) out[p++] = 1.0 + std::exp(t_[k]);
        out[p++] = mu_alpha_;
        out[p++] = sigma_alpha_;
        out[p++] = mu_beta_;
        out[p++] = sigma_beta_;
    }

    std::map<std::string, double> acceptance() const {
        auto block = [](const std::vector<AdaptiveScale>& v) {
            double acc = 0.0, att = 0.0;
            for (const auto& s : v) { acc += s.accepted; att += s.attempted; }
            return att == 0.0 ? 0.0 : acc / att;
        };
        return {{"alpha", block(alpha_sc_)}, {"beta", block(beta_sc_)},
                {"omega", block(omega_sc_)}, {"shift", shift_sc_.rate()}};
    }

private:
    double row_loglik(std::size_t i, double a) const {
        double ll = 0.0;
        for (std::size_t k = 0; k < K_; ++k) {
            if (s_->is_missing(i, k)) continue;
            ll += log_nb1_pmf(s_->responses[i][k], std::exp(a + beta_[k]), 1.0 + std::exp(t_[k]));
        }
        return ll;
    }

    double col_loglik(std::size_t k, double b, double t) const {
        const double omega = 1.0 + std::exp(t);
        double ll = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (s_->is_missing(i, k)) continue;
            ll += log_nb1_pmf(s_->responses[i][k], std::exp(alpha_[i] + b), omega);
        }
        return ll;
    }

    // p(omega) = 1/omega^2 on (1, inf) (i.e. 1/omega uniform); with
    // omega = 1 + e^t the Jacobian contributes e^t.
    static double omega_logprior(double t) {
        return t - 2.0 * std::log1p(std::exp(t));
    }

    void gibbs_hypers(Rng& rng) {
        auto normal_mean_update = [&rng](const std::vector<double>& x, double sigma,
                                         double m0, double sd0) {
            const double n = static_cast<double>(x.size());
            double sum = 0.0;
            for (double v : x) sum += v;
            const double prec = n / (sigma * sigma) + 1.0 / (sd0 * sd0);
            const double mu = (sum / (sigma * sigma) + m0 / (sd0 * sd0)) / prec;
            return rnorm(rng, mu, std::sqrt(1.0 / prec));
        };
        auto variance_update = [&rng, this](const std::vector<double>& x, double mu) {
            double ss = 0.0;
            for (double v : x) ss += (v - mu) * (v - mu);
            const double shape = pr_.sigma2_shape + 0.5 * static_cast<double>(x.size());
            const double scale = pr_.sigma2_scale + 0.5 * ss;
            // inverse-gamma draw via the reciprocal of a gamma draw
            return std::sqrt(1.0 / rgamma(rng, shape, 1.0 / scale));
        };
        mu_alpha_ = normal_mean_update(alpha_, sigma_alpha_, pr_.mu_alpha_mean, pr_.mu_alpha_sd);
        sigma_alpha_ = variance_update(alpha_, mu_alpha_);
        mu_beta_ = normal_mean_update(beta_, sigma_beta_, pr_.mu_beta_mean, pr_.mu_beta_sd);
        sigma_beta_ = variance_update(beta_, mu_beta_);
    }

    // The likelihood only sees alpha_i + beta_k, so the ridge
    // (alpha + c, beta - c) has flat likelihood; shifting the group means
    // along with their members leaves the group priors unchanged too, and
    // only the hyperpriors on mu_alpha / mu_beta decide.  This mixes the
    // unidentified direction quickly.
    void shift_move(Rng& rng, bool adapting) {
        const double c = rnorm(rng, 0.0, shift_sc_.step());
        const double cur = log_normal_pdf(mu_alpha_, pr_.mu_alpha_mean, pr_.mu_alpha_sd) +
                           log_normal_pdf(mu_beta_, pr_.mu_beta_mean, pr_.mu_beta_sd);
        const double prop = log_normal_pdf(mu_alpha_ + c, pr_.mu_alpha_mean, pr_.mu_alpha_sd) +
                            log_normal_pdf(mu_beta_ - c, pr_.mu_beta_mean, pr_.mu_beta_sd);
        const bool acc = prop - cur >= 0.0 || std::log(runif(rng)) < prop - cur;
        shift_sc_.record(acc);
        if (acc) {
            for (double& a : alpha_) a += c;
            for (double& b : beta_) b -= c;
            mu_alpha_ += c;
            mu_beta_ -= c;
        }
        if (adapting) shift_sc_.maybe_adapt(0.35, 25);
    }

    const ArdSurvey* s_;
    OverdispersedPriors pr_;
    std::size_t n_, K_;
    std::vector<double> alpha_, beta_, t_;
    double mu_alpha_ = 0.0, sigma_alpha_ = 1.0, mu_beta_ = 0.0, sigma_beta_ = 1.0;
    std::vector<AdaptiveScale> alpha_sc_, beta_sc_, omega_sc_;
    AdaptiveScale shift_sc_;
    std::vector<std::string> names_;
};

} // namespace detail

inline PosteriorDraws fit_overdispersed(const ArdSurvey& s, const McmcConfig& cfg = {},
                                        const OverdispersedPriors& priors = {}) {
    require_valid(s);
    if (s.known_columns().empty())
        throw ModelError("the overdispersed model needs at least one known column for scaling");
    return run_chains(cfg, [&s, &priors](std::size_t, Rng& init_rng) {
        return detail::OverdispersedModel(s, priors, init_rng);
    });
}

// Fix the likelihood-invariant scale: after the shift, the rare known
// columns' exp(beta) sum to their true prevalence sum.  alpha and beta
// draws move in lockstep; hyperparameter draws are left as sampled.
inline PosteriorDraws renormalize_betas(const PosteriorDraws& draws, const ArdSurvey& s,
                                        std::vector<std::size_t> rare_cols = {}) {
    if (rare_cols.empty()) rare_cols = s.known_columns();
    if (rare_cols.empty()) throw ModelError("renormalisation needs at least one known column");
    double prevalence = 0.0;
    std::vector<std::size_t> beta_idx;
    for (std::size_t k : rare_cols) {
        if (!s.is_known(k))
            throw ModelError("renormalisation column '" + s.column_names[k] + "' has no known size");
        prevalence += static_cast<double>(s.known_size[k]) /
                      static_cast<double>(s.population_total);
        beta_idx.push_back(draws.index("beta[" + s.column_names[k] + "]"));
    }

    PosteriorDraws out = draws;
    std::vector<std::size_t> alpha_idx, all_beta_idx;
    for (std::size_t p = 0; p < draws.param_names.size(); ++p) {
        if (draws.param_names[p].rfind("alpha[", 0) == 0) alpha_idx.push_back(p);
        if (draws.param_names[p].rfind("beta[", 0) == 0) all_beta_idx.push_back(p);
    }
    const std::size_t C = draws.n_chains(), M = draws.draws_per_chain();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m) {
            double sum = 0.0;
            for (std::size_t p : beta_idx) sum += std::exp(draws.values[p][c][m]);
            const double shift = std::log(sum / prevalence);
            for (std::size_t p : alpha_idx) out.values[p][c][m] += shift;
            for (std::size_t p : all_beta_idx) out.values[p][c][m] -= shift;
        }
    return out;
}

// Append posterior draws of the unknown column's size, N * exp(beta_u),
// to (renormalised) draws.
inline PosteriorDraws overdispersed_size_draws(const PosteriorDraws& draws, const ArdSurvey& s,
                                               std::size_t ucol) {
    if (s.is_known(ucol))
        throw ModelError("size draws are for unknown columns; '" + s.column_names[ucol] +
                         "' has a known size");
    const std::size_t bidx = draws.index("beta[" + s.column_names[ucol] + "]");
    PosteriorDraws out = draws;
    out.param_names.push_back("N_u");
    std::vector<std::vector<double>> nu(draws.n_chains(),
                                        std::vector<double>(draws.draws_per_chain()));
    for (std::size_t c = 0; c < draws.n_chains(); ++c)
        for (std::size_t m = 0; m < draws.draws_per_chain(); ++m)
            nu[c][m] = static_cast<double>(s.population_total) *
                       std::exp(draws.values[bidx][c][m]);
    out.values.push_back(std::move(nu));
    return out;
}

} // namespace scaleup
