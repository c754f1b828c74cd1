#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "scaleup/classic.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/survey.hpp"

// Internal-consistency checks on the known columns: hold one census size out,
// back-estimate it from the remaining known columns, and compare with the
// held-out figure.  Columns whose back-estimates miss badly flag reporting
// problems (over-counting, definitional drift, a stale census figure), and
// the stepwise trimmer removes the worst offenders one at a time.

namespace scaleup {

struct LooRow {
    std::string name;                  // column whose size was held out
    std::size_t column = 0;            // its index in the survey the table was built from
    long long known_size = 0;          // the held-out census size
    double backestimate = 0.0;         // scale-up estimate of that size
    double ratio = 0.0;                // backestimate / known_size
    double log_ratio = 0.0;            // -inf when the back-estimate is zero
    double se_log = std::numeric_limits<double>::quiet_NaN();  // jackknife se of log backestimate
};

namespace detail {

// Jackknife standard error of the log back-estimate.  Estimated degrees are
// row-local, so dropping a respondent perturbs only that row's contribution;
// every leave-one-respondent-out estimate follows in O(1) from the full sums.
inline double jackknife_se_log(const ArdSurvey& fold, std::size_t ucol, const std::string& method) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = fold.n();
    if (n < 2) return nan;
    const DegreeEstimates deg =
        (method == "mos" || method == "wmos") ? mos_degrees(fold) : pimle_degrees(fold);
    const std::vector<double>* w =
        (method == "wmle" || method == "wmos") ? &fold.weights : nullptr;
    const double N = static_cast<double>(fold.population_total);
    const bool mean_family = (method == "pimle" || method == "mos" || method == "wmos");

    std::vector<double> leave(n, 0.0);
    if (mean_family) {
        // point = mean of w_i * N * y_iu / d_i over rows with an answer and d_i > 0
        std::vector<double> term(n, nan);
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold.is_missing(i, ucol) || deg.values[i] <= 0.0) continue;
            const double wi = w ? (*w)[i] : 1.0;
            term[i] = wi * N * static_cast<double>(fold.responses[i][ucol]) / deg.values[i];
            acc += term[i];
            ++used;
        }
        if (used < 2) return nan;
        const double full = acc / static_cast<double>(used);
        for (std::size_t i = 0; i < n; ++i)
            leave[i] = std::isnan(term[i]) ? full
                                           : (acc - term[i]) / static_cast<double>(used - 1);
    } else {
        // point = N * sum_i w_i y_iu / sum_i d_i over rows with an answer
        std::vector<double> num(n, nan), den(n, 0.0);
        double ysum = 0.0, dsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold.is_missing(i, ucol)) continue;
            const double wi = w ? (*w)[i] : 1.0;
            num[i] = wi * static_cast<double>(fold.responses[i][ucol]);
            den[i] = deg.values[i];
            ysum += num[i];
            dsum += den[i];
        }
        if (dsum <= 0.0) return nan;
        const double full = N * ysum / dsum;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(num[i])) { leave[i] = full; continue; }
            const double dd = dsum - den[i];
            if (dd <= 0.0) return nan;
            leave[i] = N * (ysum - num[i]) / dd;
        }
    }

    double mean_log = 0.0;
    for (double v : leave) {
        if (!(v > 0.0)) return nan;  // zero or undefined leave-out estimate
        mean_log += std::log(v);
    }
    mean_log /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : leave) {
        const double d = std::log(v) - mean_log;
        ss += d * d;
    }
    return std::sqrt((static_cast<double>(n) - 1.0) / static_cast<double>(n) * ss);
}

} // namespace detail

// One row per known column, each back-estimated with its census size held out.
inline std::vector<LooRow> loo_backestimates(const ArdSurvey& s, const std::string& method = "mle") {
    const ClassicEstimator estimate = classic_estimator(method);
    const auto known = s.known_columns();
    if (known.size() < 2)
        throw ModelError("leave-one-out needs at least two known columns");
    std::vector<LooRow> out;
    out.reserve(known.size());
    for (std::size_t k : known) {
        ArdSurvey fold = s;
        fold.known_size[k] = unknown_size;
        LooRow row;
        row.name = s.column_names[k];
        row.column = k;
        row.known_size = s.known_size[k];
        row.backestimate = estimate(fold, k).point;
        row.ratio = row.backestimate / static_cast<double>(row.known_size);
        row.log_ratio = row.backestimate > 0.0
                            ? std::log(row.ratio)
                            : -std::numeric_limits<double>::infinity();
        row.se_log = detail::jackknife_se_log(fold, k, method);
        out.push_back(std::move(row));
    }
    return out;
}

struct TrimConfig {
    double ratio_tolerance = 1.25;  // keep columns back-estimated within this factor
    std::size_t max_removals = std::numeric_limits<std::size_t>::max();
};

struct TrimRound {
    std::string removed_column;
    double log_ratio = 0.0;      // of the removed column, at removal time
    std::vector<LooRow> table;   // the table the decision was based on; column
                                 // indices refer to that round's survey
};

struct TrimResult {
    ArdSurvey survey;            // input with the flagged columns removed
    std::vector<TrimRound> rounds;
};

// Repeatedly drop the known column whose back-estimate misses its census size
// by the largest factor, until every remaining column lands within the
// tolerance or removing more would leave fewer than two known columns.
inline TrimResult trim_stepwise(const ArdSurvey& s, const std::string& method = "mle",
                                const TrimConfig& cfg = {}) {
    if (cfg.ratio_tolerance <= 1.0)
        throw UsageError("trim_stepwise: ratio tolerance must exceed 1");
    TrimResult res;
    res.survey = s;
    const double tol = std::log(cfg.ratio_tolerance);
    while (res.rounds.size() < cfg.max_removals && res.survey.known_columns().size() > 2) {
        std::vector<LooRow> table = loo_backestimates(res.survey, method);
        std::size_t worst = 0;
        for (std::size_t r = 1; r < table.size(); ++r)
            if (std::abs(table[r].log_ratio) > std::abs(table[worst].log_ratio)) worst = r;
        if (!(std::abs(table[worst].log_ratio) > tol)) break;
        TrimRound round;
        round.removed_column = table[worst].name;
        round.log_ratio = table[worst].log_ratio;
        round.table = std::move(table);
        res.survey = drop_column(res.survey, round.table[worst].column);
        res.rounds.push_back(std::move(round));
    }
    return res;
}

} // namespace scaleup
