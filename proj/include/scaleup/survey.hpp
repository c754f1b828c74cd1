#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "scaleup/errors.hpp"

// Core data model for aggregated relational data ("how many X do you
// know?").  A survey is an n x K matrix of nonnegative counts plus the
// population total, the sizes of the known subpopulations, and optional
// weights / covariates / ordinal recall responses.

namespace scaleup {

using Json = nlohmann::ordered_json;

inline constexpr int missing_response = -1;         // cell not answered
inline constexpr long long unknown_size = -1;       // column has no known size

struct ArdSurvey {
    long long population_total = 0;
    std::vector<std::string> column_names;           // one per subpopulation column
    std::vector<long long> known_size;               // aligned; unknown_size if not known
    std::vector<std::vector<int>> responses;         // n x K; missing_response allowed
    std::vector<std::string> respondent_ids;         // optional row labels
    std::vector<double> weights;                     // optional, size n, positive
    std::vector<std::string> covariate_names;        // optional
    std::vector<std::vector<double>> covariates;     // n x p when present
    std::vector<std::vector<int>> likert;            // optional n x K ordinal recall
    std::vector<int> likert_upper;                   // per-column scale top; 0 = none

    std::size_t n() const { return responses.size(); }
    std::size_t k() const { return column_names.size(); }
    bool has_weights() const { return !weights.empty(); }
    bool is_known(std::size_t col) const { return known_size.at(col) != unknown_size; }
    bool is_missing(std::size_t row, std::size_t col) const {
        return responses[row][col] == missing_response;
    }

    std::vector<std::size_t> known_columns() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < k(); ++j) if (is_known(j)) out.push_back(j);
        return out;
    }
    std::vector<std::size_t> unknown_columns() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < k(); ++j) if (!is_known(j)) out.push_back(j);
        return out;
    }
    long long total_known_size() const {
        long long s = 0;
        for (std::size_t j = 0; j < k(); ++j) if (is_known(j)) s += known_size[j];
        return s;
    }
    std::size_t column_index(const std::string& name) const {
        for (std::size_t j = 0; j < k(); ++j) if (column_names[j] == name) return j;
        throw DataError("no column named '" + name + "' in survey");
    }
    std::string respondent_label(std::size_t row) const {
        if (row < respondent_ids.size()) return respondent_ids[row];
        return std::to_string(row);
    }
};

struct DegreeEstimates {
    std::vector<double> values;      // one per respondent, >= 0; 0 when undefined
    std::string method;
    std::size_t undefined = 0;       // respondents with no usable known-column cells
};

struct SizeEstimate {
    std::string method;
    double point = 0.0;
    std::optional<double> se;
    std::optional<std::pair<double, double>> interval;
    std::vector<std::string> calibrations_applied;
    Json metadata = Json::object();
};

// Reports about the hidden population collected from its own members:
// how many frame members each hidden member is known by, and how many of
// those relationships the frame side is actually aware of.
struct EnrichedArd {
    long long frame_total = 0;
    std::vector<std::string> member_ids;
    std::vector<long long> out_reports;     // relationships into the frame
    std::vector<long long> aware_counts;    // of which the frame side is aware
    std::vector<double> inclusion_probs;    // sampling probability of each member

    std::size_t m() const { return out_reports.size(); }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
    std::string rule;
    std::string message;
    long long row = -1;   // -1: not row-specific
    long long col = -1;   // -1: not column-specific
};

struct ValidationReport {
    std::vector<ValidationIssue> violations;  // structural requirements
    std::vector<ValidationIssue> warnings;    // legal but worth flagging

    bool ok() const { return violations.empty(); }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& v : violations) os << "violation [" << v.rule << "]: " << v.message << "\n";
        for (const auto& w : warnings) os << "warning [" << w.rule << "]: " << w.message << "\n";
        return os.str();
    }
};

inline ValidationReport validate(const ArdSurvey& s) {
    ValidationReport rep;
    auto bad = [&rep](std::string rule, std::string msg, long long row = -1, long long col = -1) {
        rep.violations.push_back({std::move(rule), std::move(msg), row, col});
    };
    auto warn = [&rep](std::string rule, std::string msg, long long row = -1, long long col = -1) {
        rep.warnings.push_back({std::move(rule), std::move(msg), row, col});
    };

    if (s.population_total <= 0)
        bad("population_total", "population total must be positive");
    if (s.column_names.empty())
        bad("columns", "survey has no subpopulation columns");
    if (s.known_size.size() != s.k())
        bad("columns", "known-size vector does not align with the columns");

    std::set<std::string> seen;
    for (std::size_t j = 0; j < s.column_names.size(); ++j) {
        if (!seen.insert(s.column_names[j]).second)
            bad("columns", "duplicate column name '" + s.column_names[j] + "'", -1, (long long)j);
    }

    const long long N = s.population_total;
    for (std::size_t j = 0; j < s.known_size.size() && j < s.k(); ++j) {
        const long long Nk = s.known_size[j];
        if (Nk == unknown_size) continue;
        if (Nk <= 0 || (N > 0 && Nk >= N))
            bad("known_size", "known size of '" + s.column_names[j] +
                "' must lie strictly between 0 and the population total", -1, (long long)j);
    }
    if (!s.column_names.empty() && s.known_columns().empty())
        warn("known_size", "survey has no known-size columns; most estimators need at least one");

    for (std::size_t i = 0; i < s.responses.size(); ++i) {
        if (s.responses[i].size() != s.k()) {
            bad("responses", "row " + s.respondent_label(i) + " has wrong column count", (long long)i);
            continue;
        }
        for (std::size_t j = 0; j < s.k(); ++j) {
            const int y = s.responses[i][j];
            if (y == missing_response) {
                if (!s.is_known(j))
                    warn("missing_unknown", "respondent " + s.respondent_label(i) +
                         " did not answer unknown column '" + s.column_names[j] + "'",
                         (long long)i, (long long)j);
                continue;
            }
            if (y < 0)
                bad("responses", "negative count for respondent " + s.respondent_label(i) +
                    " in '" + s.column_names[j] + "'", (long long)i, (long long)j);
            else if (N > 0 && y > N)
                bad("responses", "count for respondent " + s.respondent_label(i) + " in '" +
                    s.column_names[j] + "' exceeds the population total", (long long)i, (long long)j);
        }
    }

    if (!s.respondent_ids.empty()) {
        if (s.respondent_ids.size() != s.n())
            bad("respondent_ids", "respondent id list does not match the row count");
        std::set<std::string> ids;
        for (std::size_t i = 0; i < s.respondent_ids.size(); ++i)
            if (!ids.insert(s.respondent_ids[i]).second)
                bad("respondent_ids", "duplicate respondent id '" + s.respondent_ids[i] + "'", (long long)i);
    }

    if (s.has_weights()) {
        if (s.weights.size() != s.n())
            bad("weights", "weight vector does not match the respondent count");
        for (std::size_t i = 0; i < s.weights.size(); ++i)
            if (!(s.weights[i] > 0.0) || !std::isfinite(s.weights[i]))
                bad("weights", "weight of respondent " + s.respondent_label(i) +
                    " must be positive and finite", (long long)i);
    }

    if (!s.covariates.empty()) {
        if (s.covariates.size() != s.n())
            bad("covariates", "covariate matrix does not match the respondent count");
        for (std::size_t i = 0; i < s.covariates.size(); ++i) {
            if (s.covariates[i].size() != s.covariate_names.size())
                bad("covariates", "covariate row " + s.respondent_label(i) + " has wrong width", (long long)i);
            else
                for (std::size_t p = 0; p < s.covariates[i].size(); ++p)
                    if (!std::isfinite(s.covariates[i][p]))
                        bad("covariates", "non-finite covariate for respondent " +
                            s.respondent_label(i), (long long)i);
        }
    }

    if (!s.likert.empty()) {
        if (s.likert.size() != s.n())
            bad("likert", "ordinal recall matrix does not match the respondent count");
        if (s.likert_upper.size() != s.k())
            bad("likert", "ordinal recall bounds do not align with the columns");
        for (std::size_t i = 0; i < s.likert.size(); ++i) {
            if (s.likert[i].size() != s.k()) {
                bad("likert", "ordinal recall row " + s.respondent_label(i) + " has wrong width", (long long)i);
                continue;
            }
            for (std::size_t j = 0; j < s.k() && j < s.likert_upper.size(); ++j) {
                const int x = s.likert[i][j];
                if (x == missing_response) continue;
                const int upper = s.likert_upper[j];
                if (upper <= 0)
                    bad("likert", "ordinal responses present for '" + s.column_names[j] +
                        "' but the column has no scale bound", (long long)i, (long long)j);
                else if (x < 0 || x > upper)
                    bad("likert", "ordinal response outside [0, bound] for respondent " +
                        s.respondent_label(i) + " in '" + s.column_names[j] + "'",
                        (long long)i, (long long)j);
            }
        }
    }

    return rep;
}

inline void require_valid(const ArdSurvey& s) {
    const ValidationReport rep = validate(s);
    if (!rep.ok()) throw DataError("survey failed validation:\n" + rep.to_string());
}

// Copy of the survey with column k removed everywhere it appears.
inline ArdSurvey drop_column(const ArdSurvey& s, std::size_t k) {
    if (k >= s.column_names.size()) throw UsageError("drop_column: column index out of range");
    ArdSurvey out = s;
    out.column_names.erase(out.column_names.begin() + static_cast<std::ptrdiff_t>(k));
    out.known_size.erase(out.known_size.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto& row : out.responses) row.erase(row.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto& row : out.likert) row.erase(row.begin() + static_cast<std::ptrdiff_t>(k));
    if (!out.likert_upper.empty())
        out.likert_upper.erase(out.likert_upper.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct ColumnSummary {
    std::string name;
    long long known = unknown_size;
    std::size_t observed = 0;     // non-missing cells
    double mean = 0.0;
    double variance = 0.0;
    double zero_proportion = 0.0;
};

struct SurveySummary {
    std::size_t respondents = 0;
    long long population_total = 0;
    std::vector<ColumnSummary> columns;
};

inline SurveySummary summarize(const ArdSurvey& s) {
    SurveySummary out;
    out.respondents = s.n();
    out.population_total = s.population_total;
    for (std::size_t j = 0; j < s.k(); ++j) {
        ColumnSummary c;
        c.name = s.column_names[j];
        c.known = s.known_size[j];
        double sum = 0.0, sumsq = 0.0;
        std::size_t zeros = 0, m = 0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            const int y = s.responses[i][j];
            if (y == missing_response) continue;
            ++m;
            sum += y;
            sumsq += static_cast<double>(y) * y;
            if (y == 0) ++zeros;
        }
        c.observed = m;
        if (m > 0) {
            c.mean = sum / static_cast<double>(m);
            c.zero_proportion = static_cast<double>(zeros) / static_cast<double>(m);
            if (m > 1) c.variance = (sumsq - sum * c.mean) / static_cast<double>(m - 1);
        }
        out.columns.push_back(std::move(c));
    }
    return out;
}

} // namespace scaleup
