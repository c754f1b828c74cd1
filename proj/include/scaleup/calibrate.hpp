#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scaleup/errors.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/numerics.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// Post-hoc corrections for known reporting distortions.
//
// 1. Visibility scaling: if only a fraction tau of true contacts are
//    visible to respondents, estimates scale up by 1/tau.
// 2. Recall curve: reported log prevalences beta' relate to true ones via
//    f(beta) = b + (beta - b)/2 + (1 - exp(-a (beta - b))) / (2a),
//    an increasing map with f(b) = b and slope above 1/2; fitting f on
//    known subpopulations and inverting it undoes the distortion.
// 3. Errors-in-variables recall regression: leave-one-out backestimates of
//    known sizes give pairs (log N_k, log N-hat_k); a measurement-error
//    regression of the second on the first yields a correction applied to
//    posterior draws of the unknown size.

namespace scaleup {

struct VisibilityFactor {
    double value = 1.0;     // fraction of ties the reports actually see
    std::string source;     // where the factor came from (study, prior, ...)
};

inline SizeEstimate scale_by_visibility(SizeEstimate est, const VisibilityFactor& vf) {
    if (!(vf.value > 0.0) || vf.value > 1.0)
        throw ModelError("visibility factor must lie in (0, 1]");
    est.point /= vf.value;
    if (est.se) *est.se /= vf.value;
    if (est.interval) {
        est.interval->first /= vf.value;
        est.interval->second /= vf.value;
    }
    est.calibrations_applied.push_back("visibility");
    if (!est.metadata.contains("decisions")) est.metadata["decisions"] = Json::array();
    est.metadata["decisions"].push_back(
        "scaled by 1/visibility, visibility=" + std::to_string(vf.value) +
        (vf.source.empty() ? std::string() : " (" + vf.source + ")"));
    return est;
}

// ---------------------------------------------------------------------------
// Recall distortion curve
// ---------------------------------------------------------------------------

struct CalibrationCurve {
    double a = 1.0;          // curvature; larger bends the map harder
    double b = 0.0;          // anchor where recall is exact
    std::string fitted_on;   // provenance label
};

inline double curve_value(const CalibrationCurve& c, double beta) {
    const double d = beta - c.b;
    return c.b + 0.5 * d + (1.0 - std::exp(-c.a * d)) / (2.0 * c.a);
}

inline double curve_slope(const CalibrationCurve& c, double beta) {
    return 0.5 + 0.5 * std::exp(-c.a * (beta - c.b));
}

// Least squares over (log a, b) on pairs of true and recalled log scales.
inline CalibrationCurve fit_calibration_curve(const std::vector<double>& beta_true,
                                              const std::vector<double>& beta_recalled,
                                              const std::string& fitted_on = "") {
    if (beta_true.size() != beta_recalled.size() || beta_true.size() < 2)
        throw ModelError("curve fitting needs at least two (true, recalled) pairs");
    auto sse = [&](const std::vector<double>& p) {
        const CalibrationCurve c{std::exp(p[0]), p[1], ""};
        double acc = 0.0;
        for (std::size_t k = 0; k < beta_true.size(); ++k) {
            const double r = beta_recalled[k] - curve_value(c, beta_true[k]);
            acc += r * r;
        }
        return acc;
    };
    const double b0 = *std::min_element(beta_true.begin(), beta_true.end());
    std::vector<double> best = nelder_mead(sse, {0.0, b0}, 0.7, 4000, 1e-15);
    // restart from the optimum to escape a mediocre simplex collapse
    best = nelder_mead(sse, best, 0.1, 2000, 1e-15);
    CalibrationCurve out{std::exp(best[0]), best[1], fitted_on};
    return out;
}

// Invert the (strictly increasing) curve by bracketed bisection.
inline double invert_curve(const CalibrationCurve& c, double recalled) {
    double lo = recalled, hi = recalled;
    double width = 1.0;
    for (int it = 0; it < 200 && curve_value(c, lo) > recalled; ++it) { lo -= width; width *= 2.0; }
    width = 1.0;
    for (int it = 0; it < 200 && curve_value(c, hi) < recalled; ++it) { hi += width; width *= 2.0; }
    if (lo == hi) return lo;
    return bisect_root([&](double x) { return curve_value(c, x) - recalled; }, lo, hi, 1e-14);
}

// Undo the distortion on a size estimate: log prevalence is mapped through
// the inverse curve; the standard error is rescaled proportionally.
inline SizeEstimate apply_curve_to_estimate(SizeEstimate est, const CalibrationCurve& c,
                                            long long population_total) {
    const double N = static_cast<double>(population_total);
    if (!(est.point > 0.0))
        throw ModelError("curve correction needs a positive point estimate");
    auto correct = [&](double v) {
        if (v <= 0.0) return 0.0;
        return N * std::exp(invert_curve(c, std::log(v / N)));
    };
    const double before = est.point;
    est.point = correct(before);
    if (est.interval)
        est.interval = {correct(est.interval->first), correct(est.interval->second)};
    if (est.se) *est.se *= est.point / before;
    est.calibrations_applied.push_back("recall_curve");
    if (!est.metadata.contains("decisions")) est.metadata["decisions"] = Json::array();
    est.metadata["decisions"].push_back("recall curve inverted on the log-prevalence scale; "
                                        "se rescaled proportionally");
    return est;
}

// ---------------------------------------------------------------------------
// Errors-in-variables recall regression
// ---------------------------------------------------------------------------

struct EivFit {
    double a = 0.0;          // intercept
    double b = 1.0;          // slope
    double sigma_eps = 0.0;  // residual sd beyond the per-point noise
};

// Maximum likelihood for y_k = a + b x_k + noise, Var(noise_k) =
// s_k^2 + sigma_eps^2: weighted least squares for (a, b) at fixed
// sigma_eps, profile search over sigma_eps.
inline EivFit fit_eiv(const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<double>& s) {
    const std::size_t K = x.size();
    if (y.size() != K || s.size() != K || K < 3)
        throw ModelError("errors-in-variables fit needs at least three aligned points");
    for (double v : s)
        if (v < 0.0 || !std::isfinite(v)) throw ModelError("per-point noise sd must be finite and >= 0");

    auto wls = [&](double sigma_eps, double* a_out, double* b_out) {
        double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = 1.0 / (s[k] * s[k] + sigma_eps * sigma_eps + 1e-12);
            sw += w; swx += w * x[k]; swy += w * y[k];
            swxx += w * x[k] * x[k]; swxy += w * x[k] * y[k];
        }
        const double det = sw * swxx - swx * swx;
        if (std::abs(det) < 1e-12) throw ModelError("recall regression design is degenerate");
        *b_out = (sw * swxy - swx * swy) / det;
        *a_out = (swy - *b_out * swx) / sw;
    };
    auto nll = [&](double sigma_eps) {
        double a, b;
        wls(sigma_eps, &a, &b);
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double v = s[k] * s[k] + sigma_eps * sigma_eps + 1e-12;
            const double r = y[k] - a - b * x[k];
            acc += 0.5 * (std::log(v) + r * r / v);
        }
        return acc;
    };

    const double upper = std::max(1.0, 4.0 * sample_sd(y));
    const double sig = golden_minimize(nll, 0.0, upper, 1e-9);
    EivFit fit;
    fit.sigma_eps = (nll(0.0) <= nll(sig)) ? 0.0 : sig;  // allow the boundary
    wls(fit.sigma_eps, &fit.a, &fit.b);
    if (std::abs(fit.b) < 1e-6)
        throw ModelError("degenerate recall slope: backestimates carry no size signal");
    return fit;
}

// Correct posterior draws of log N_u: (Y - a)/b plus fresh residual noise
// N(0, sigma_eps^2 / b^2), reproducibly seeded.
inline std::vector<double> eiv_adjust_log_draws(const EivFit& fit, const std::vector<double>& log_draws,
                                                std::uint64_t seed) {
    Rng rng = make_rng(seed, "eiv-adjust");
    std::vector<double> out(log_draws.size());
    const double zsd = std::abs(fit.sigma_eps / fit.b);
    for (std::size_t i = 0; i < log_draws.size(); ++i)
        out[i] = (log_draws[i] - fit.a) / fit.b + (zsd > 0.0 ? rnorm(rng, 0.0, zsd) : 0.0);
    return out;
}

// Same correction applied to recorded size draws (absolute scale) of one
// parameter, returning a copy with that parameter replaced.
inline PosteriorDraws eiv_adjust_size_draws(const PosteriorDraws& draws, const EivFit& fit,
                                            std::uint64_t seed, const std::string& param = "N_u") {
    const std::size_t pidx = draws.index(param);
    PosteriorDraws out = draws;
    std::vector<double> flat;
    for (const auto& chain : draws.values[pidx])
        for (double v : chain) {
            if (!(v > 0.0)) throw ModelError("size draws must be positive for the recall correction");
            flat.push_back(std::log(v));
        }
    const std::vector<double> adj = eiv_adjust_log_draws(fit, flat, seed);
    std::size_t pos = 0;
    for (auto& chain : out.values[pidx])
        for (double& v : chain) v = std::exp(adj[pos++]);
    return out;
}

} // namespace scaleup
