#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "scaleup/errors.hpp"

// Small numerical toolbox shared by the estimators: summary statistics,
// log densities with careful edge handling, and a few derivative-free
// optimisers sized for the 1-3 parameter problems that show up here.

namespace scaleup {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw ModelError("mean of empty vector");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

inline double sample_sd(const std::vector<double>& x) { return std::sqrt(sample_variance(x)); }

// Type-7 quantile (the usual linear interpolation of order statistics).
inline double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw ModelError("quantile of empty vector");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(const std::vector<double>& x) { return quantile(x, 0.5); }

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ModelError("pearson needs two equal-length vectors");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }
inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// ---------------------------------------------------------------------------
// Log densities / pmfs
// ---------------------------------------------------------------------------

// Binomial log pmf with a continuous trial count (lgamma extension).
// Returns -inf outside the support instead of NaN so Metropolis ratios
// can reject out-of-range proposals directly.
inline double log_binomial_pmf(double y, double trials, double p) {
    if (y < 0.0 || y > trials || trials < 0.0) return neg_inf;
    if (p <= 0.0) return (y == 0.0) ? 0.0 : neg_inf;
    if (p >= 1.0) return (y == trials) ? 0.0 : neg_inf;
    return std::lgamma(trials + 1.0) - std::lgamma(y + 1.0) - std::lgamma(trials - y + 1.0)
         + y * std::log(p) + (trials - y) * std::log1p(-p);
}

inline double log_poisson_pmf(double y, double lambda) {
    if (y < 0.0) return neg_inf;
    if (lambda <= 0.0) return (y == 0.0) ? 0.0 : neg_inf;
    return y * std::log(lambda) - lambda - std::lgamma(y + 1.0);
}

// lgamma(y + s) - lgamma(s) for integer y >= 0, stable when s is huge
// (the naive difference cancels catastrophically once s >> y).
inline double lgamma_ratio(double y, double s) {
    const double yi = std::floor(y + 0.5);
    if (s > 1e6 && yi >= 0.0 && yi == y && yi <= 65536.0) {
        double acc = 0.0;
        for (double j = 0.0; j < yi; j += 1.0) acc += std::log(s + j);
        return acc;
    }
    return std::lgamma(y + s) - std::lgamma(s);
}

// Negative binomial with mean mu and variance omega * mu (omega > 1);
// equivalently a Poisson(mu * g) with g ~ Gamma(shape mu/(omega-1),
// scale (omega-1)/mu ... i.e. mean 1).  omega -> 1 recovers the Poisson.
inline double log_nb1_pmf(double y, double mu, double omega) {
    if (y < 0.0) return neg_inf;
    if (mu <= 0.0) return (y == 0.0) ? 0.0 : neg_inf;
    const double t = omega - 1.0;
    if (t <= 1e-12) return log_poisson_pmf(y, mu);
    const double s = mu / t;                       // gamma shape
    const double log_inv_omega = -std::log1p(t);   // log(1/omega)
    const double log_one_minus = std::log(t) - std::log1p(t); // log(1 - 1/omega)
    return lgamma_ratio(y, s) - std::lgamma(y + 1.0) + s * log_inv_omega + y * log_one_minus;
}

inline double log_beta_fn(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double log_beta_pdf(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0 || a <= 0.0 || b <= 0.0) return neg_inf;
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

// Mean / dispersion parameterisation: mean m in (0,1), dispersion rho in
// (0,1); rho -> 0 concentrates the distribution at m.
struct BetaShapes { double a, b; };

inline BetaShapes beta_shapes_from_mean_disp(double m, double rho) {
    if (m <= 0.0 || m >= 1.0) throw ModelError("beta mean must lie strictly inside (0,1)");
    if (rho <= 0.0 || rho >= 1.0) throw ModelError("beta dispersion must lie strictly inside (0,1)");
    const double c = (1.0 - rho) / rho;
    return BetaShapes{m * c, (1.0 - m) * c};
}

inline double log_normal_pdf(double x, double mu, double sd) {
    if (sd <= 0.0) return neg_inf;
    const double z = (x - mu) / sd;
    return -0.5 * z * z - std::log(sd) - 0.91893853320467274178; // log sqrt(2 pi)
}

inline double log_inv_gamma_pdf(double x, double shape, double scale) {
    if (x <= 0.0) return neg_inf;
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double logsumexp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

// ---------------------------------------------------------------------------
// Derivative-free optimisation
// ---------------------------------------------------------------------------

// Golden-section search for a 1-d minimum on [lo, hi].
inline double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                              double tol = 1e-10, int max_iter = 400) {
    const double gr = 0.61803398874989484820;
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a); fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Nelder-Mead on a handful of dimensions; enough for the two-parameter
// curve fits done here.  Returns the best vertex.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step = 0.5,
                                       int max_iter = 2000, double ftol = 1e-12) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    for (int it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> order(n + 1);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= ftol * (1.0 + std::abs(fv[best]))) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        }
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
            return p;
        };
        std::vector<double> refl = blend(-1.0);
        double frefl = f(refl);
        if (frefl < fv[best]) {
            std::vector<double> exp_ = blend(-2.0);
            double fexp = f(exp_);
            if (fexp < frefl) { simplex[worst] = exp_; fv[worst] = fexp; }
            else { simplex[worst] = refl; fv[worst] = frefl; }
        } else if (frefl < fv[second]) {
            simplex[worst] = refl; fv[worst] = frefl;
        } else {
            std::vector<double> contr = blend(0.5);
            double fcontr = f(contr);
            if (fcontr < fv[worst]) { simplex[worst] = contr; fv[worst] = fcontr; }
            else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i) if (fv[i] < fv[best]) best = i;
    return simplex[best];
}

// Bisection on a bracketing interval; f(lo) and f(hi) must differ in sign.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          double tol = 1e-12, int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) throw ModelError("bisect_root: interval does not bracket a root");
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || (hi - lo) < tol * (1.0 + std::abs(mid))) return mid;
        if ((fm < 0.0) == (flo < 0.0)) { lo = mid; flo = fm; }
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace scaleup
