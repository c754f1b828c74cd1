#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scaleup/classic.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/numerics.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// A family of binomial size models with lognormal personal degrees:
//
//   d_i ~ LogNormal(mu, sigma^2)        (continuous network size)
//   y_ik | d_i ~ Binomial(d_i, p_ik)    (continuous-trials relaxation)
//
// The variants differ in the tie probability p_ik:
//   random_degree   p_ik = N_k / N for every group
//   barrier         p_ik = q_ik,  q_ik ~ Beta(mean N_k / N, dispersion rho_k),
//                   so some respondents run into group k more than others
//   transmission    known groups as in random_degree; the hidden group is
//                   only visible with probability tau, p_iu = tau N_u / N
//   combined        the hidden group gets both effects, p_iu = tau q_iu
//
// The unknown size has a flat prior on (0, N); tau carries a Beta prior that
// must be supplied, since the data alone cannot separate tau from N_u -- a
// dedicated joint move proposes (tau e^eps, N_u e^-eps) to traverse that
// ridge.  Latent per-cell frequencies q_ik are integrated over by Gibbs
// draws and are not recorded.

namespace scaleup {

enum class MaltielVariant { random_degree, barrier, transmission, combined };

inline std::string maltiel_variant_label(MaltielVariant v) {
    switch (v) {
        case MaltielVariant::random_degree: return "maltiel-random";
        case MaltielVariant::barrier: return "maltiel-barrier";
        case MaltielVariant::transmission: return "maltiel-transmission";
        case MaltielVariant::combined: return "maltiel-combined";
    }
    throw ModelError("unknown model variant");
}

struct MaltielPriors {
    double mu_mean = 5.0;     // prior mean of mu (log degree location)
    double mu_sd = 10.0;      // diffuse by default
    double sigma2_shape = 2.0;
    double sigma2_scale = 1.0;
    // Beta(eta, nu) prior on the hidden group's visibility tau; required by
    // the transmission and combined variants.
    std::optional<std::pair<double, double>> transmission_prior;
    // Pin every barrier dispersion at a fixed value instead of sampling it.
    std::optional<double> rho_fixed;
};

namespace detail {

class MaltielModel {
public:
    MaltielModel(const ArdSurvey& s, std::size_t ucol, MaltielVariant variant,
                 const MaltielPriors& priors, Rng& init)
        : s_(s), pr_(priors), variant_(variant) {
        has_tau_ = variant == MaltielVariant::transmission || variant == MaltielVariant::combined;
        // Which columns carry latent per-respondent frequencies.
        for (std::size_t k : s.known_columns()) used_.push_back(k);
        used_.push_back(ucol);
        upos_ = used_.size() - 1;
        colq_.assign(used_.size(), false);
        if (variant == MaltielVariant::barrier)
            std::fill(colq_.begin(), colq_.end(), true);
        if (variant == MaltielVariant::combined) colq_[upos_] = true;
        has_q_ = variant == MaltielVariant::barrier || variant == MaltielVariant::combined;

        if (has_tau_) {
            if (!pr_.transmission_prior)
                throw ModelError(
                    "the " + maltiel_variant_label(variant) + " variant needs a Beta prior on "
                    "the hidden group's visibility; supply transmission_prior = (eta, nu)");
            if (pr_.transmission_prior->first <= 0.0 || pr_.transmission_prior->second <= 0.0)
                throw ModelError("transmission prior parameters must be positive");
        }
        if (pr_.rho_fixed && (*pr_.rho_fixed <= 0.0 || *pr_.rho_fixed >= 1.0))
            throw ModelError("fixed barrier dispersion must lie strictly inside (0,1)");

        const std::size_t n = s.n();
        N_ = static_cast<double>(s.population_total);

        // Starting point: method-of-sums degrees and the ratio estimator,
        // jittered so chains start apart.
        const DegreeEstimates deg = mos_degrees(s);
        logd_.resize(n);
        maxy_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < used_.size(); ++c) {
                const int y = s.responses[i][used_[c]];
                if (y != missing_response) maxy_[i] = std::max(maxy_[i], static_cast<double>(y));
            }
            const double floor = std::max(maxy_[i] + 0.5, 1.0);
            logd_[i] = std::log(std::max(deg.values[i], floor)) + 0.2 * runif(init);
        }
        mu_ = mean(logd_) + rnorm(init, 0.0, 0.1);
        sigma2_ = std::max(0.05, sample_variance(logd_)) * std::exp(rnorm(init, 0.0, 0.2));

        double start = N_ * 0.01;
        try {
            start = mle(s, ucol).point;
        } catch (const ModelError&) {
        }
        start = std::min(std::max(start, 1.0), 0.5 * N_);
        log_nu_ = std::log(start) + rnorm(init, 0.0, 0.2);
        log_nu_ = std::min(log_nu_, std::log(0.9 * N_));

        if (has_tau_) {
            const auto [eta, nu] = *pr_.transmission_prior;
            tau_ = expit(rnorm(init, logit(eta / (eta + nu)), 0.3));
            tau_ = std::min(std::max(tau_, 1e-6), 1.0 - 1e-6);
        }
        rho_.assign(used_.size(), pr_.rho_fixed.value_or(0.1));
        if (!pr_.rho_fixed)
            for (double& r : rho_) r = expit(rnorm(init, logit(0.1), 0.3));
        if (has_q_) {
            q_.assign(n, std::vector<double>(used_.size(), 0.0));
            gibbs_q(init);
        }

        d_sc_.assign(n, AdaptiveScale{0.4});
        nu_sc_ = AdaptiveScale{0.5};
        tau_sc_ = AdaptiveScale{0.5};
        joint_sc_ = AdaptiveScale{0.5};
        rho_sc_.assign(used_.size(), AdaptiveScale{0.5});

        names_.reserve(n + 4 + used_.size());
        for (std::size_t i = 0; i < n; ++i) names_.push_back("d[" + s.respondent_label(i) + "]");
        names_.push_back("mu");
        names_.push_back("sigma");
        names_.push_back("N_u");
        if (has_tau_) names_.push_back("tau_u");
        if (has_q_)
            for (std::size_t c = 0; c < used_.size(); ++c)
                if (colq_[c]) names_.push_back("rho[" + s.column_names[used_[c]] + "]");
    }

    const std::vector<std::string>& param_names() const { return names_; }

    void sweep(Rng& rng, bool adapting) {
        update_degrees(rng, adapting);
        gibbs_mu(rng);
        gibbs_sigma2(rng);
        if (has_q_) {
            gibbs_q(rng);
            if (!pr_.rho_fixed) update_rho(rng, adapting);
        }
        if (has_tau_) update_tau(rng, adapting);
        update_size(rng, adapting);
        if (has_tau_) joint_move(rng, adapting);
    }

    void snapshot(std::vector<double>& out) const {
        out.clear();
        for (double x : logd_) out.push_back(std::exp(x));
        out.push_back(mu_);
        out.push_back(std::sqrt(sigma2_));
        out.push_back(std::exp(log_nu_));
        if (has_tau_) out.push_back(tau_);
        if (has_q_)
            for (std::size_t c = 0; c < used_.size(); ++c)
                if (colq_[c]) out.push_back(rho_[c]);
    }

    std::map<std::string, double> acceptance() const {
        std::map<std::string, double> out;
        double acc = 0.0, att = 0.0;
        for (const auto& sc : d_sc_) { acc += sc.accepted; att += sc.attempted; }
        out["d"] = att > 0 ? acc / att : 0.0;
        out["N_u"] = nu_sc_.rate();
        if (has_tau_) {
            out["tau"] = tau_sc_.rate();
            out["joint"] = joint_sc_.rate();
        }
        if (has_q_ && !pr_.rho_fixed) {
            acc = att = 0.0;
            for (std::size_t c = 0; c < used_.size(); ++c)
                if (colq_[c]) { acc += rho_sc_[c].accepted; att += rho_sc_[c].attempted; }
            out["rho"] = att > 0 ? acc / att : 0.0;
        }
        return out;
    }

private:
    double prevalence(std::size_t c, double nu) const {
        return c == upos_ ? nu / N_
                          : static_cast<double>(s_.known_size[used_[c]]) / N_;
    }

    // Tie probability for cell (i, c) under the current state.
    double cell_prob(std::size_t i, std::size_t c, double nu, double tau) const {
        double p = colq_[c] ? q_[i][c] : prevalence(c, nu);
        if (has_tau_ && c == upos_) p *= tau;
        return p;
    }

    double cell_loglik(std::size_t i, std::size_t c, double d, double nu, double tau) const {
        const int y = s_.responses[i][used_[c]];
        if (y == missing_response) return 0.0;
        const double p = cell_prob(i, c, nu, tau);
        if (p >= 1.0) return neg_inf;
        return log_binomial_pmf(static_cast<double>(y), d, p);
    }

    double row_loglik(std::size_t i, double d) const {
        double acc = 0.0;
        const double nu = std::exp(log_nu_);
        for (std::size_t c = 0; c < used_.size(); ++c) acc += cell_loglik(i, c, d, nu, tau_);
        return acc;
    }

    // Terms involving the unknown size: the hidden column's likelihood when
    // p depends on N_u directly, or the latent frequencies' prior when the
    // barrier layer sits in between.
    double size_terms(double nu, double tau) const {
        double acc = 0.0;
        const double p = nu / N_;
        if (p <= 0.0 || p >= 1.0) return neg_inf;
        if (colq_[upos_]) {
            BetaShapes sh;
            try {
                sh = beta_shapes_from_mean_disp(p, rho_[upos_]);
            } catch (const ModelError&) {
                return neg_inf;
            }
            for (std::size_t i = 0; i < s_.n(); ++i)
                acc += log_beta_pdf(q_[i][upos_], sh.a, sh.b);
        } else {
            for (std::size_t i = 0; i < s_.n(); ++i)
                acc += cell_loglik(i, upos_, std::exp(logd_[i]), nu, tau);
        }
        return acc;
    }

    double tau_terms(double tau) const {
        double acc = 0.0;
        const double nu = std::exp(log_nu_);
        for (std::size_t i = 0; i < s_.n(); ++i)
            acc += cell_loglik(i, upos_, std::exp(logd_[i]), nu, tau);
        return acc;
    }

    void update_degrees(Rng& rng, bool adapting) {
        const double sd = std::sqrt(sigma2_);
        for (std::size_t i = 0; i < s_.n(); ++i) {
            auto target = [&](double x) {
                return log_normal_pdf(x, mu_, sd) + row_loglik(i, std::exp(x));
            };
            const double cur = target(logd_[i]);
            mh_normal(rng, logd_[i], d_sc_[i], cur, target);
            if (adapting) d_sc_[i].maybe_adapt(0.35, 25);
        }
    }

    void gibbs_mu(Rng& rng) {
        const double n = static_cast<double>(s_.n());
        const double prior_prec = 1.0 / (pr_.mu_sd * pr_.mu_sd);
        const double prec = n / sigma2_ + prior_prec;
        double sum = 0.0;
        for (double x : logd_) sum += x;
        const double m = (sum / sigma2_ + pr_.mu_mean * prior_prec) / prec;
        mu_ = rnorm(rng, m, std::sqrt(1.0 / prec));
    }

    void gibbs_sigma2(Rng& rng) {
        double ss = 0.0;
        for (double x : logd_) ss += (x - mu_) * (x - mu_);
        const double shape = pr_.sigma2_shape + 0.5 * static_cast<double>(s_.n());
        const double scale = pr_.sigma2_scale + 0.5 * ss;
        sigma2_ = scale / rgamma(rng, shape, 1.0);
    }

    void gibbs_q(Rng& rng) {
        const double nu = std::exp(log_nu_);
        for (std::size_t c = 0; c < used_.size(); ++c) {
            if (!colq_[c]) continue;
            const BetaShapes sh = beta_shapes_from_mean_disp(prevalence(c, nu), rho_[c]);
            for (std::size_t i = 0; i < s_.n(); ++i) {
                const int y = s_.responses[i][used_[c]];
                if (y == missing_response) {
                    q_[i][c] = rbeta(rng, sh.a, sh.b);
                    continue;
                }
                const double d = std::exp(logd_[i]);
                const double slack = std::max(d - static_cast<double>(y), 1e-8);
                q_[i][c] = rbeta(rng, sh.a + static_cast<double>(y), sh.b + slack);
                q_[i][c] = std::min(std::max(q_[i][c], 1e-12), 1.0 - 1e-12);
            }
        }
    }

    void update_rho(Rng& rng, bool adapting) {
        const double nu = std::exp(log_nu_);
        for (std::size_t c = 0; c < used_.size(); ++c) {
            if (!colq_[c]) continue;
            const double m = prevalence(c, nu);
            auto target = [&](double t) {
                const double r = expit(t);
                if (r <= 1e-12 || r >= 1.0 - 1e-12) return neg_inf;
                BetaShapes sh;
                try {
                    sh = beta_shapes_from_mean_disp(m, r);
                } catch (const ModelError&) {
                    return neg_inf;
                }
                double acc = std::log(r) + std::log1p(-r);  // uniform prior, logit scale
                for (std::size_t i = 0; i < s_.n(); ++i)
                    acc += log_beta_pdf(q_[i][c], sh.a, sh.b);
                return acc;
            };
            double t = logit(rho_[c]);
            const double cur = target(t);
            mh_normal(rng, t, rho_sc_[c], cur, target);
            rho_[c] = expit(t);
            if (adapting) rho_sc_[c].maybe_adapt(0.35, 25);
        }
    }

    void update_tau(Rng& rng, bool adapting) {
        const auto [eta, nu_b] = *pr_.transmission_prior;
        auto target = [&](double t) {
            const double tau = expit(t);
            if (tau <= 1e-12 || tau >= 1.0 - 1e-12) return neg_inf;
            return eta * std::log(tau) + nu_b * std::log1p(-tau) + tau_terms(tau);
        };
        double t = logit(tau_);
        const double cur = target(t);
        mh_normal(rng, t, tau_sc_, cur, target);
        tau_ = expit(t);
        if (adapting) tau_sc_.maybe_adapt(0.35, 25);
    }

    void update_size(Rng& rng, bool adapting) {
        auto target = [&](double x) {
            const double nu = std::exp(x);
            if (nu >= N_) return neg_inf;
            return x + size_terms(nu, tau_);  // flat prior on N_u, log scale
        };
        const double cur = target(log_nu_);
        mh_normal(rng, log_nu_, nu_sc_, cur, target);
        if (adapting) nu_sc_.maybe_adapt(0.35, 25);
    }

    // The hidden column only constrains the product tau N_u (exactly for the
    // transmission variant, loosely for combined); a move along the ridge
    // lets the prior pick the split.
    void joint_move(Rng& rng, bool adapting) {
        const auto [eta, nu_b] = *pr_.transmission_prior;
        auto target = [&](double lt, double lx) {
            const double tau = std::exp(lt), nu = std::exp(lx);
            if (tau >= 1.0 || nu >= N_) return neg_inf;
            return eta * lt + nu_b * std::log1p(-tau) + lx + size_terms(nu, tau) +
                   (colq_[upos_] ? tau_terms(tau) : 0.0);
        };
        const double lt = std::log(tau_);
        const double cur = target(lt, log_nu_);
        const double eps = rnorm(rng, 0.0, joint_sc_.step());
        const double prop = target(lt + eps, log_nu_ - eps);
        const bool acc = std::isfinite(prop) &&
                         (prop - cur >= 0.0 || std::log(runif(rng)) < prop - cur);
        joint_sc_.record(acc);
        if (acc) {
            tau_ = std::exp(lt + eps);
            log_nu_ -= eps;
        }
        if (adapting) joint_sc_.maybe_adapt(0.35, 25);
    }

    const ArdSurvey& s_;
    MaltielPriors pr_;
    MaltielVariant variant_;
    bool has_tau_ = false, has_q_ = false;
    std::vector<std::size_t> used_;  // survey columns in play: knowns, then the target
    std::size_t upos_ = 0;
    std::vector<bool> colq_;
    double N_ = 0.0;

    std::vector<double> logd_, maxy_, rho_;
    std::vector<std::vector<double>> q_;
    double mu_ = 0.0, sigma2_ = 1.0, log_nu_ = 0.0, tau_ = 1.0;

    std::vector<AdaptiveScale> d_sc_, rho_sc_;
    AdaptiveScale nu_sc_, tau_sc_, joint_sc_;
    std::vector<std::string> names_;
};

} // namespace detail

inline PosteriorDraws fit_maltiel(const ArdSurvey& s, std::size_t ucol, MaltielVariant variant,
                                  const McmcConfig& cfg = {}, const MaltielPriors& priors = {}) {
    require_valid(s);
    if (ucol >= s.k()) throw ModelError("no such column");
    if (s.is_known(ucol))
        throw ModelError("'" + s.column_names[ucol] + "' already has a known size");
    if (s.known_columns().empty())
        throw ModelError("degree estimation needs at least one known column");
    return run_chains(cfg, [&](std::size_t, Rng& init) {
        return detail::MaltielModel(s, ucol, variant, priors, init);
    });
}

} // namespace scaleup
