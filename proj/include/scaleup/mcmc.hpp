#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "scaleup/errors.hpp"
#include "scaleup/numerics.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// Shared machinery for the posterior samplers: adaptive random-walk scales,
// a multi-chain driver with per-chain seed streams, and convergence
// diagnostics (split potential scale reduction and autocorrelation-based
// effective sample size with Geyer's initial monotone truncation).

namespace scaleup {

struct McmcConfig {
    int chains = 4;
    int burnin = 2000;
    int keep = 2000;          // retained draws per chain (after thinning)
    int thin = 1;
    std::uint64_t seed = 20250801;
    unsigned threads = 0;     // 0: hardware count
    double target_accept = 0.35;
    int adapt_interval = 25;  // sweeps per adaptation window during burn-in
};

// Random-walk step size tuned toward a target acceptance rate during
// burn-in (decaying adjustments), then frozen.
struct AdaptiveScale {
    double log_step = 0.0;
    long long attempted = 0, accepted = 0;
    long long window_attempted = 0, window_accepted = 0;
    int rounds = 0;

    explicit AdaptiveScale(double initial = 1.0) : log_step(std::log(initial)) {}

    double step() const { return std::exp(log_step); }

    void record(bool acc) {
        ++attempted; ++window_attempted;
        if (acc) { ++accepted; ++window_accepted; }
    }

    void maybe_adapt(double target, int interval) {
        if (window_attempted < interval) return;
        ++rounds;
        const double rate = static_cast<double>(window_accepted) /
                            static_cast<double>(window_attempted);
        const double gain = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(rounds)));
        log_step += gain * (rate - target);
        log_step = std::clamp(log_step, -12.0, 8.0);
        window_attempted = window_accepted = 0;
    }

    double rate() const {
        return attempted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
    }
};

// One Gaussian random-walk update of x given the current log posterior
// value; returns the (possibly unchanged) log posterior.  `lp` is the log
// posterior as a function of x alone, up to a constant.
template <class LogPost>
inline double mh_normal(Rng& rng, double& x, AdaptiveScale& sc, double lp_cur, LogPost&& lp) {
    const double prop = x + rnorm(rng, 0.0, sc.step());
    const double lp_prop = lp(prop);
    const bool acc = std::isfinite(lp_prop) &&
                     (lp_prop - lp_cur >= 0.0 || std::log(runif(rng)) < lp_prop - lp_cur);
    sc.record(acc);
    if (acc) { x = prop; return lp_prop; }
    return lp_cur;
}

// ---------------------------------------------------------------------------
// Draw storage
// ---------------------------------------------------------------------------

struct PosteriorDraws {
    std::vector<std::string> param_names;
    std::vector<std::vector<std::vector<double>>> values;  // [param][chain][draw]
    std::map<std::string, std::vector<double>> acceptance; // block -> rate per chain
    std::uint64_t seed = 0;
    int burnin = 0;
    int thin = 1;

    std::size_t n_params() const { return param_names.size(); }
    std::size_t n_chains() const { return values.empty() ? 0 : values[0].size(); }
    std::size_t draws_per_chain() const {
        return (values.empty() || values[0].empty()) ? 0 : values[0][0].size();
    }

    bool has(const std::string& name) const {
        return std::find(param_names.begin(), param_names.end(), name) != param_names.end();
    }

    std::size_t index(const std::string& name) const {
        for (std::size_t p = 0; p < param_names.size(); ++p)
            if (param_names[p] == name) return p;
        throw ModelError("no recorded parameter named '" + name + "'");
    }

    const std::vector<std::vector<double>>& chains_of(const std::string& name) const {
        return values[index(name)];
    }

    // All chains concatenated in chain order (a deterministic merge).
    std::vector<double> merged(const std::string& name) const {
        const auto& ch = chains_of(name);
        std::vector<double> out;
        for (const auto& c : ch) out.insert(out.end(), c.begin(), c.end());
        return out;
    }
};

// ---------------------------------------------------------------------------
// Multi-chain driver
// ---------------------------------------------------------------------------

// A model must provide:
//   param_names() -> const std::vector<std::string>&
//   sweep(Rng&, bool adapting)      one full scan over its blocks
//   snapshot(std::vector<double>&)  current values, aligned with param_names()
//   acceptance() -> std::map<std::string, double>   per-block rates
// The factory is called once per chain with (chain_index, init_rng) and may
// randomise starting points through the rng.
template <class ModelFactory>
PosteriorDraws run_chains(const McmcConfig& cfg, ModelFactory&& factory) {
    if (cfg.chains < 1) throw ModelError("at least one chain is required");
    if (cfg.keep < 1) throw ModelError("at least one retained draw is required");
    if (cfg.thin < 1) throw ModelError("thin must be >= 1");

    struct ChainOut {
        std::vector<std::string> names;
        std::vector<std::vector<double>> draws;  // [draw][param]
        std::map<std::string, double> accept;
    };
    std::vector<ChainOut> results(static_cast<std::size_t>(cfg.chains));

    parallel_for(static_cast<std::size_t>(cfg.chains), cfg.threads, [&](std::size_t c) {
        Rng init_rng = make_rng(cfg.seed, "chain-init", c);
        auto model = factory(c, init_rng);
        Rng rng = make_rng(cfg.seed, "chain-run", c);

        for (int it = 0; it < cfg.burnin; ++it) model.sweep(rng, true);
        ChainOut& out = results[c];
        out.names = model.param_names();
        out.draws.reserve(static_cast<std::size_t>(cfg.keep));
        std::vector<double> snap(out.names.size());
        for (int m = 0; m < cfg.keep; ++m) {
            for (int t = 0; t < cfg.thin; ++t) model.sweep(rng, false);
            model.snapshot(snap);
            out.draws.push_back(snap);
        }
        out.accept = model.acceptance();
    });

    PosteriorDraws draws;
    draws.seed = cfg.seed;
    draws.burnin = cfg.burnin;
    draws.thin = cfg.thin;
    draws.param_names = results[0].names;
    const std::size_t P = draws.param_names.size();
    for (const auto& r : results)
        if (r.names != draws.param_names)
            throw ModelError("chains disagree about the parameter layout");

    draws.values.assign(P, std::vector<std::vector<double>>(
                               static_cast<std::size_t>(cfg.chains),
                               std::vector<double>(static_cast<std::size_t>(cfg.keep))));
    for (std::size_t c = 0; c < results.size(); ++c)
        for (std::size_t m = 0; m < results[c].draws.size(); ++m)
            for (std::size_t p = 0; p < P; ++p)
                draws.values[p][c][m] = results[c].draws[m][p];

    for (const auto& [block, rate] : results[0].accept) {
        auto& v = draws.acceptance[block];
        v.resize(results.size());
        for (std::size_t c = 0; c < results.size(); ++c) v[c] = results[c].accept.at(block);
    }
    return draws;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

// Split potential scale reduction: each chain is halved, then the usual
// between/within comparison runs on the 2C half-chains.  A flat posterior
// (every draw equal) gives 1; exactly stuck-but-separated chains give +inf.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::size_t half = std::numeric_limits<std::size_t>::max();
    for (const auto& c : chains) half = std::min(half, c.size() / 2);
    if (half < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        halves.emplace_back(c.begin(), c.begin() + half);
        halves.emplace_back(c.begin() + half, c.begin() + 2 * half);
    }
    const std::size_t S = halves.size();
    const double M = static_cast<double>(half);

    std::vector<double> means(S);
    double grand = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        means[s] = mean(halves[s]);
        grand += means[s] / static_cast<double>(S);
    }
    double B = 0.0, W = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        B += (means[s] - grand) * (means[s] - grand);
        W += sample_variance(halves[s]) / static_cast<double>(S);
    }
    B *= M / static_cast<double>(S - 1);

    if (W <= 0.0) return (B <= 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (M - 1.0) / M * W + B / M;
    return std::sqrt(var_plus / W);
}

// Effective sample size across chains from pooled autocorrelations, with
// Geyer's initial positive/monotone truncation.  A constant sequence is
// pure signal here: its ESS is the total number of draws.
inline double ess(const std::vector<std::vector<double>>& chains) {
    const std::size_t C = chains.size();
    if (C == 0) return 0.0;
    const std::size_t M = chains[0].size();
    if (M < 4) return static_cast<double>(C * M);
    const double total = static_cast<double>(C * M);

    // Constant draws carry no sampling noise at all; report the full count
    // rather than feeding rounding residue into the autocorrelation sums.
    const bool constant = std::all_of(chains.begin(), chains.end(), [&](const auto& ch) {
        return std::all_of(ch.begin(), ch.end(), [&](double v) { return v == chains[0][0]; });
    });
    if (constant) return total;

    // Per-chain autocovariances (biased normalisation, lag 0..M-1 as needed).
    std::vector<double> means(C), vars(C);
    double W = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        means[c] = mean(chains[c]);
        vars[c] = sample_variance(chains[c]);
        W += vars[c] / static_cast<double>(C);
    }
    double B = 0.0;
    if (C > 1) {
        double grand = 0.0;
        for (double m : means) grand += m / static_cast<double>(C);
        for (double m : means) B += (m - grand) * (m - grand);
        B *= static_cast<double>(M) / static_cast<double>(C - 1);
    }
    const double var_plus = (static_cast<double>(M) - 1.0) / static_cast<double>(M) * W +
                            (C > 1 ? B / static_cast<double>(M) : W / static_cast<double>(M));
    if (var_plus <= 0.0) return total;  // constant draws

    auto autocov = [&](std::size_t c, std::size_t t) {
        double acc = 0.0;
        for (std::size_t i = 0; i + t < M; ++i)
            acc += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
        return acc / static_cast<double>(M);
    };

    double tau = 1.0;          // 1 + 2 sum rho_t
    double prev_pair = std::numeric_limits<double>::infinity();
    double rho_prev;
    {
        double g = 0.0;
        for (std::size_t c = 0; c < C; ++c) g += autocov(c, 1) / static_cast<double>(C);
        rho_prev = 1.0 - (W - g) / var_plus;
    }
    for (std::size_t t = 1; t + 1 < M; t += 2) {
        double g_next = 0.0;
        for (std::size_t c = 0; c < C; ++c) g_next += autocov(c, t + 1) / static_cast<double>(C);
        const double rho_next = 1.0 - (W - g_next) / var_plus;
        double pair = rho_prev + rho_next;          // Gamma_m
        if (pair < 0.0) break;                      // initial positive sequence ends
        pair = std::min(pair, prev_pair);           // enforce monotone decrease
        prev_pair = pair;
        tau += 2.0 * pair;
        if (t + 2 >= M) break;
        double g = 0.0;
        for (std::size_t c = 0; c < C; ++c) g += autocov(c, t + 2) / static_cast<double>(C);
        rho_prev = 1.0 - (W - g) / var_plus;
    }
    return std::max(1.0, total / std::max(tau, 1e-12));
}

struct ParamDiagnostics {
    std::string name;
    double rhat = 1.0;
    double ess = 0.0;
};

struct ChainDiagnostics {
    std::vector<ParamDiagnostics> params;
    std::map<std::string, std::vector<double>> acceptance;
    std::vector<std::string> warnings;

    const ParamDiagnostics& at(const std::string& name) const {
        for (const auto& p : params) if (p.name == name) return p;
        throw ModelError("no diagnostics for parameter '" + name + "'");
    }
};

inline ChainDiagnostics diagnostics(const PosteriorDraws& draws, double rhat_threshold = 1.1) {
    ChainDiagnostics out;
    out.acceptance = draws.acceptance;
    const bool single = draws.n_chains() < 2;
    if (single)
        out.warnings.push_back("only one chain: split R-hat compares its halves only; "
                               "run several chains for a sharper check");
    for (const auto& name : draws.param_names) {
        ParamDiagnostics d;
        d.name = name;
        const auto& ch = draws.chains_of(name);
        d.rhat = split_rhat(ch);
        d.ess = scaleup::ess(ch);
        if (d.rhat > rhat_threshold)  // also catches an infinite ratio
            out.warnings.push_back("parameter '" + name + "' has split R-hat " +
                                   std::to_string(d.rhat) + " above " +
                                   std::to_string(rhat_threshold));
        out.params.push_back(std::move(d));
    }
    return out;
}

// Posterior summary of one recorded parameter as a size estimate:
// median point, standard deviation, central 95% interval.
inline SizeEstimate posterior_size(const PosteriorDraws& draws, const std::string& method,
                                   const std::string& param = "N_u") {
    const std::vector<double> pooled = draws.merged(param);
    if (pooled.empty()) throw ModelError("no draws recorded for '" + param + "'");
    SizeEstimate est;
    est.method = method;
    est.point = median(pooled);
    est.se = sample_sd(pooled);
    est.interval = {quantile(pooled, 0.025), quantile(pooled, 0.975)};
    est.metadata = Json::object();
    est.metadata["excluded_respondents"] = 0;
    est.metadata["decisions"] = Json::array();
    est.metadata["decisions"].push_back("point is the posterior median of " + param);
    est.metadata["chains"] = draws.n_chains();
    est.metadata["draws_per_chain"] = draws.draws_per_chain();
    const auto& ch = draws.chains_of(param);
    est.metadata["rhat"] = split_rhat(ch);
    est.metadata["ess"] = scaleup::ess(ch);
    return est;
}

} // namespace scaleup
