#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scaleup/errors.hpp"
#include "scaleup/survey.hpp"

// Closed-form size estimators.
//
// Missing cells are handled per respondent: degree estimates use whatever
// known-column cells were answered, and a respondent enters a size estimate
// only if they answered the unknown column.  Respondents whose estimated
// degree is zero (or undefined) cannot contribute to ratio-of-means /
// mean-of-ratios averages and are excluded; the count of exclusions is
// recorded in the estimate metadata.

namespace scaleup {

// d_i = N * (sum_k y_ik) / (sum_k N_k) over answered known columns.
inline DegreeEstimates pimle_degrees(const ArdSurvey& s) {
    const auto known = s.known_columns();
    if (known.empty()) throw ModelError("degree estimation needs at least one known column");
    DegreeEstimates out;
    out.method = "ratio_of_sums";
    out.values.assign(s.n(), 0.0);
    for (std::size_t i = 0; i < s.n(); ++i) {
        double ysum = 0.0, nsum = 0.0;
        for (std::size_t j : known) {
            if (s.is_missing(i, j)) continue;
            ysum += s.responses[i][j];
            nsum += static_cast<double>(s.known_size[j]);
        }
        if (nsum <= 0.0) { ++out.undefined; continue; }
        out.values[i] = static_cast<double>(s.population_total) * ysum / nsum;
    }
    return out;
}

// d_i = (N / L_i) * sum_k y_ik / N_k over the L_i answered known columns.
inline DegreeEstimates mos_degrees(const ArdSurvey& s) {
    const auto known = s.known_columns();
    if (known.empty()) throw ModelError("degree estimation needs at least one known column");
    DegreeEstimates out;
    out.method = "mean_of_ratios";
    out.values.assign(s.n(), 0.0);
    for (std::size_t i = 0; i < s.n(); ++i) {
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t j : known) {
            if (s.is_missing(i, j)) continue;
            acc += static_cast<double>(s.responses[i][j]) / static_cast<double>(s.known_size[j]);
            ++used;
        }
        if (used == 0) { ++out.undefined; continue; }
        out.values[i] = static_cast<double>(s.population_total) * acc / static_cast<double>(used);
    }
    return out;
}

namespace detail {

inline Json base_metadata(std::size_t excluded) {
    Json md = Json::object();
    md["excluded_respondents"] = excluded;
    md["decisions"] = Json::array();
    return md;
}

inline void note(Json& metadata, const std::string& text) {
    metadata["decisions"].push_back(text);
}

// Mean of N * y_iu / d_i over usable respondents (optionally weighted).
inline SizeEstimate mean_of_ratios_estimate(const ArdSurvey& s, std::size_t ucol,
                                            const DegreeEstimates& deg,
                                            const std::vector<double>* weights,
                                            const std::string& method) {
    const double N = static_cast<double>(s.population_total);
    double acc = 0.0;
    std::size_t used = 0, excluded = 0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        if (s.is_missing(i, ucol) || deg.values[i] <= 0.0) { ++excluded; continue; }
        const double w = weights ? (*weights)[i] : 1.0;
        acc += w * N * static_cast<double>(s.responses[i][ucol]) / deg.values[i];
        ++used;
    }
    if (used == 0)
        throw ModelError(method + ": no respondent has both an answer for '" +
                         s.column_names[ucol] + "' and a positive estimated degree");
    SizeEstimate est;
    est.method = method;
    est.point = acc / static_cast<double>(used);
    est.metadata = base_metadata(excluded);
    return est;
}

} // namespace detail

inline SizeEstimate pimle(const ArdSurvey& s, std::size_t ucol) {
    return detail::mean_of_ratios_estimate(s, ucol, pimle_degrees(s), nullptr, "pimle");
}

// Ratio of sums: N * sum_i y_iu / sum_i d_i, with the binomial-likelihood
// standard error sqrt(N * point / sum_i d_i) and a symmetric 95% interval
// truncated to [0, N].
inline SizeEstimate mle(const ArdSurvey& s, std::size_t ucol) {
    const DegreeEstimates deg = pimle_degrees(s);
    const double N = static_cast<double>(s.population_total);
    double ysum = 0.0, dsum = 0.0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        if (s.is_missing(i, ucol)) { ++excluded; continue; }
        ysum += s.responses[i][ucol];
        dsum += deg.values[i];
    }
    if (dsum <= 0.0)
        throw ModelError("mle: the estimated degrees of the usable respondents sum to zero");
    SizeEstimate est;
    est.method = "mle";
    est.point = N * ysum / dsum;
    const double se = std::sqrt(N * est.point / dsum);
    est.se = se;
    est.interval = {std::max(0.0, est.point - 1.96 * se),
                    std::min(N, est.point + 1.96 * se)};
    est.metadata = detail::base_metadata(excluded);
    return est;
}

struct MosConfig {
    double small_size_fraction = 0.001;  // warn when N_k / N falls below this
};

inline SizeEstimate mos(const ArdSurvey& s, std::size_t ucol, const MosConfig& cfg = {}) {
    SizeEstimate est = detail::mean_of_ratios_estimate(s, ucol, mos_degrees(s), nullptr, "mos");
    for (std::size_t j : s.known_columns()) {
        const double frac = static_cast<double>(s.known_size[j]) /
                            static_cast<double>(s.population_total);
        if (frac < cfg.small_size_fraction)
            detail::note(est.metadata, "known column '" + s.column_names[j] +
                         "' is below " + std::to_string(cfg.small_size_fraction) +
                         " of the population; scaled-mean degrees may be unstable");
    }
    return est;
}

// Weighted ratio of sums: N * sum_i w_i y_iu / sum_i d_i.  Weights enter the
// numerator as supplied -- they are not renormalised, so scaling every weight
// by c scales the estimate by c.  Self-normalised designs should supply
// weights averaging one.
inline SizeEstimate weighted_mle(const ArdSurvey& s, std::size_t ucol) {
    if (!s.has_weights()) throw ModelError("wmle: survey carries no respondent weights");
    const DegreeEstimates deg = pimle_degrees(s);
    const double N = static_cast<double>(s.population_total);
    double ysum = 0.0, dsum = 0.0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        if (s.is_missing(i, ucol)) { ++excluded; continue; }
        ysum += s.weights[i] * static_cast<double>(s.responses[i][ucol]);
        dsum += deg.values[i];
    }
    if (dsum <= 0.0)
        throw ModelError("wmle: the estimated degrees of the usable respondents sum to zero");
    SizeEstimate est;
    est.method = "wmle";
    est.point = N * ysum / dsum;
    est.metadata = detail::base_metadata(excluded);
    detail::note(est.metadata, "weights are used as supplied, without renormalisation");
    return est;
}

// Weighted mean of ratios: (N / n_used) * sum_i w_i y_iu / d_i.
inline SizeEstimate weighted_mos(const ArdSurvey& s, std::size_t ucol) {
    if (!s.has_weights()) throw ModelError("wmos: survey carries no respondent weights");
    SizeEstimate est = detail::mean_of_ratios_estimate(s, ucol, mos_degrees(s), &s.weights, "wmos");
    detail::note(est.metadata, "weights are used as supplied, without renormalisation");
    return est;
}

// ---------------------------------------------------------------------------
// Bracketing by zero-count proportions
// ---------------------------------------------------------------------------

// The fraction of respondents reporting zero contacts with a subpopulation
// shrinks as the subpopulation grows.  Placing the unknown column's zero
// proportion among the known columns' (sorted by size) brackets its size.
struct JohnsenBracket {
    long long lower = 0;
    long long upper = 0;
    std::size_t ordering_position = 0;  // index in the size-sorted known list
    double zero_proportion = 0.0;       // of the unknown column
};

inline JohnsenBracket johnsen_bounds(const ArdSurvey& s, std::size_t ucol) {
    const auto known = s.known_columns();
    if (known.empty()) throw ModelError("bracketing needs at least one known column");
    if (s.is_known(ucol)) throw ModelError("bracketing target must be an unknown column");

    auto zero_prop = [&s](std::size_t j) {
        std::size_t zeros = 0, obs = 0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            if (s.is_missing(i, j)) continue;
            ++obs;
            if (s.responses[i][j] == 0) ++zeros;
        }
        if (obs == 0) throw ModelError("column '" + s.column_names[j] + "' has no answered cells");
        return static_cast<double>(zeros) / static_cast<double>(obs);
    };

    std::vector<std::size_t> order(known);
    std::sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) {
        if (s.known_size[a] != s.known_size[b]) return s.known_size[a] < s.known_size[b];
        return s.column_names[a] < s.column_names[b];
    });

    std::vector<double> props(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) props[r] = zero_prop(order[r]);
    for (std::size_t r = 1; r < order.size(); ++r) {
        if (!(props[r] < props[r - 1]))
            throw ModelError("zero proportions are not strictly decreasing in subpopulation size: '" +
                             s.column_names[order[r - 1]] + "' (size " +
                             std::to_string(s.known_size[order[r - 1]]) + ", proportion " +
                             std::to_string(props[r - 1]) + ") vs '" + s.column_names[order[r]] +
                             "' (size " + std::to_string(s.known_size[order[r]]) + ", proportion " +
                             std::to_string(props[r]) + ")");
    }

    JohnsenBracket br;
    br.zero_proportion = zero_prop(ucol);
    std::size_t j = order.size();
    for (std::size_t r = 0; r < order.size(); ++r)
        if (props[r] < br.zero_proportion) { j = r; break; }
    br.ordering_position = j;
    br.lower = (j == 0) ? 0 : s.known_size[order[j - 1]];
    br.upper = (j == order.size()) ? s.population_total : s.known_size[order[j]];
    return br;
}

inline SizeEstimate johnsen_estimate(const ArdSurvey& s, std::size_t ucol) {
    const JohnsenBracket br = johnsen_bounds(s, ucol);
    SizeEstimate est;
    est.method = "johnsen";
    est.point = 0.5 * (static_cast<double>(br.lower) + static_cast<double>(br.upper));
    est.interval = {static_cast<double>(br.lower), static_cast<double>(br.upper)};
    est.metadata = detail::base_metadata(0);
    est.metadata["ordering_position"] = br.ordering_position;
    est.metadata["zero_proportion"] = br.zero_proportion;
    detail::note(est.metadata, "point is the midpoint of the bracket");
    return est;
}

// ---------------------------------------------------------------------------
// Generalised estimator with enriched reports
// ---------------------------------------------------------------------------

struct GnsumComponents {
    double numerator = 0.0;        // estimated total reports from the frame
    double mean_visibility = 0.0;  // estimated mean aware relationships per member
};

// point = (sum_frame y_iu / pi_i) / weighted mean of aware in-reports.
// Frame inclusion probabilities default to n / frame_total; hidden-member
// probabilities live in the enriched records.
inline std::pair<SizeEstimate, GnsumComponents> gnsum(
        const ArdSurvey& frame_survey, std::size_t ucol, const EnrichedArd& enriched,
        const std::vector<double>& frame_inclusion = {}) {
    if (enriched.m() == 0) throw ModelError("gnsum: no enriched reports supplied");
    if (!frame_inclusion.empty() && frame_inclusion.size() != frame_survey.n())
        throw ModelError("gnsum: frame inclusion probabilities do not match the respondent count");

    const double default_pi = static_cast<double>(frame_survey.n()) /
                              static_cast<double>(frame_survey.population_total);
    double num = 0.0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < frame_survey.n(); ++i) {
        if (frame_survey.is_missing(i, ucol)) { ++excluded; continue; }
        const double pi = frame_inclusion.empty() ? default_pi : frame_inclusion[i];
        if (!(pi > 0.0) || pi > 1.0)
            throw ModelError("gnsum: inclusion probability of respondent " +
                             frame_survey.respondent_label(i) + " must lie in (0, 1]");
        num += static_cast<double>(frame_survey.responses[i][ucol]) / pi;
    }

    double aware_weighted = 0.0, weight_sum = 0.0;
    for (std::size_t jm = 0; jm < enriched.m(); ++jm) {
        const double pi = enriched.inclusion_probs[jm];
        if (!(pi > 0.0) || pi > 1.0)
            throw ModelError("gnsum: enriched inclusion probabilities must lie in (0, 1]");
        aware_weighted += static_cast<double>(enriched.aware_counts[jm]) / pi;
        weight_sum += 1.0 / pi;
    }
    if (aware_weighted <= 0.0)
        throw ModelError("gnsum: estimated visibility is zero; the hidden-member reports "
                         "carry no aware relationships");

    GnsumComponents comp;
    comp.numerator = num;
    comp.mean_visibility = aware_weighted / weight_sum;

    SizeEstimate est;
    est.method = "gnsum";
    // Ordered so that exact integer census inputs divide without rounding.
    est.point = num * weight_sum / aware_weighted;
    est.metadata = detail::base_metadata(excluded);
    est.metadata["numerator"] = comp.numerator;
    est.metadata["mean_visibility"] = comp.mean_visibility;
    if (frame_inclusion.empty())
        detail::note(est.metadata, "frame inclusion probabilities defaulted to n / frame_total");
    return {est, comp};
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

using ClassicEstimator = std::function<SizeEstimate(const ArdSurvey&, std::size_t)>;

inline const std::vector<std::string>& classic_method_labels() {
    static const std::vector<std::string> labels = {"pimle", "mle", "mos", "wmle", "wmos"};
    return labels;
}

inline ClassicEstimator classic_estimator(const std::string& label) {
    if (label == "pimle") return [](const ArdSurvey& s, std::size_t u) { return pimle(s, u); };
    if (label == "mle") return [](const ArdSurvey& s, std::size_t u) { return mle(s, u); };
    if (label == "mos") return [](const ArdSurvey& s, std::size_t u) { return mos(s, u); };
    if (label == "wmle") return [](const ArdSurvey& s, std::size_t u) { return weighted_mle(s, u); };
    if (label == "wmos") return [](const ArdSurvey& s, std::size_t u) { return weighted_mos(s, u); };
    throw UsageError("unknown estimator '" + label + "'; expected one of pimle, mle, mos, wmle, wmos");
}

} // namespace scaleup
