#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "scaleup/errors.hpp"
#include "scaleup/survey.hpp"

// File formats.
//
// Survey CSV: header `respondent_id,<subpop>,...`; optional extension
// columns `weight`, `likert:<subpop>`, `cov:<name>`.  An empty field is a
// missing response.  Known sizes travel in a separate JSON file:
//   {"population_total": N, "known": {...}, "unknown": [...],
//    "likert_upper_bound": {...}}   (last key optional)
// Enriched reports CSV: `member_id,out_reports,aware_counts,inclusion_prob`.

namespace scaleup {
namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

inline long long parse_count(const std::string& tok, std::size_t line, const std::string& col) {
    std::size_t pos = 0;
    long long v = 0;
    try { v = std::stoll(tok, &pos); }
    catch (...) { pos = 0; }
    if (pos != tok.size() || v < 0)
        throw DataError("line " + std::to_string(line) + ", column '" + col + "': '" + tok +
                        "' is not a nonnegative integer");
    return v;
}

// strtod, not stod: stod throws out_of_range on subnormal tokens.
inline double parse_real(const std::string& tok, std::size_t line, const std::string& col) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size())
        throw DataError("line " + std::to_string(line) + ", column '" + col + "': '" + tok +
                        "' is not a number");
    return v;
}

// Shortest decimal string that parses back to exactly the same double.  All
// precisions are tried because %g may leave scientific notation (and shrink)
// as the precision grows: 410 prints as 4.1e+02 at two digits.
inline std::string format_double(double x) {
    char buf[64];
    std::string best;
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x && (best.empty() || std::strlen(buf) < best.size()))
            best = buf;
    }
    if (!best.empty()) return best;
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline Json parse_json_file(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed JSON in " + path + ": " + e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Survey CSV + sizes JSON
// ---------------------------------------------------------------------------

inline ArdSurvey load_survey(const std::string& survey_csv_path, const std::string& sizes_json_path) {
    const auto lines = detail::split_lines(detail::read_file(survey_csv_path));
    if (lines.empty()) throw DataError(survey_csv_path + ": file holds no survey rows");
    const auto header = detail::split_fields(lines[0]);
    if (header.empty() || header[0] != "respondent_id")
        throw DataError(survey_csv_path + ": first header field must be 'respondent_id'");

    // Classify header fields.
    struct Field { enum Kind { response, weight, likert, covariate } kind; std::string name; };
    std::vector<Field> fields;
    std::vector<std::string> column_names, covariate_names;
    std::vector<std::string> likert_names;
    bool has_weight = false;
    for (std::size_t f = 1; f < header.size(); ++f) {
        const std::string& h = header[f];
        if (h == "weight") {
            if (has_weight) throw DataError(survey_csv_path + ": duplicate 'weight' column");
            has_weight = true;
            fields.push_back({Field::weight, h});
        } else if (h.rfind("likert:", 0) == 0) {
            likert_names.push_back(h.substr(7));
            fields.push_back({Field::likert, h.substr(7)});
        } else if (h.rfind("cov:", 0) == 0) {
            covariate_names.push_back(h.substr(4));
            fields.push_back({Field::covariate, h.substr(4)});
        } else {
            if (h.empty()) throw DataError(survey_csv_path + ": empty column name in header");
            for (const auto& seen : column_names)
                if (seen == h) throw DataError(survey_csv_path + ": duplicate column '" + h + "'");
            column_names.push_back(h);
            fields.push_back({Field::response, h});
        }
    }
    if (lines.size() == 1) throw DataError(survey_csv_path + ": file holds no survey rows");

    ArdSurvey s;
    s.column_names = column_names;
    const std::size_t K = column_names.size();
    auto resp_index = [&](const std::string& name) {
        for (std::size_t j = 0; j < K; ++j) if (column_names[j] == name) return j;
        throw DataError(survey_csv_path + ": '" + name + "' refers to no survey column");
    };
    for (const auto& ln : likert_names) resp_index(ln); // must point at real columns

    const bool any_likert = !likert_names.empty();
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto toks = detail::split_fields(lines[li]);
        if (toks.size() != header.size())
            throw DataError(survey_csv_path + ": line " + std::to_string(li + 1) +
                            " has " + std::to_string(toks.size()) + " fields, expected " +
                            std::to_string(header.size()));
        if (toks[0].empty())
            throw DataError(survey_csv_path + ": line " + std::to_string(li + 1) + " has an empty respondent_id");
        s.respondent_ids.push_back(toks[0]);
        std::vector<int> row(K, missing_response);
        std::vector<int> lrow(any_likert ? K : 0, missing_response);
        std::vector<double> crow;
        for (std::size_t f = 1; f < toks.size(); ++f) {
            const Field& fd = fields[f - 1];
            const std::string& tok = toks[f];
            switch (fd.kind) {
            case Field::response:
                if (!tok.empty())
                    row[resp_index(fd.name)] = static_cast<int>(detail::parse_count(tok, li + 1, fd.name));
                break;
            case Field::weight: {
                if (tok.empty())
                    throw DataError(survey_csv_path + ": line " + std::to_string(li + 1) + " has an empty weight");
                s.weights.push_back(detail::parse_real(tok, li + 1, "weight"));
                break;
            }
            case Field::likert:
                if (!tok.empty())
                    lrow[resp_index(fd.name)] = static_cast<int>(detail::parse_count(tok, li + 1, "likert:" + fd.name));
                break;
            case Field::covariate:
                if (tok.empty())
                    throw DataError(survey_csv_path + ": line " + std::to_string(li + 1) +
                                    " has an empty covariate '" + fd.name + "'");
                crow.push_back(detail::parse_real(tok, li + 1, "cov:" + fd.name));
                break;
            }
        }
        s.responses.push_back(std::move(row));
        if (any_likert) s.likert.push_back(std::move(lrow));
        if (!covariate_names.empty()) s.covariates.push_back(std::move(crow));
    }
    s.covariate_names = covariate_names;

    // Sizes JSON.
    const Json sizes = detail::parse_json_file(sizes_json_path);
    if (!sizes.is_object() || !sizes.contains("population_total"))
        throw DataError(sizes_json_path + ": expected an object with 'population_total'");
    if (!sizes["population_total"].is_number_integer() || sizes["population_total"].get<long long>() <= 0)
        throw DataError(sizes_json_path + ": 'population_total' must be a positive integer");
    s.population_total = sizes["population_total"].get<long long>();
    s.known_size.assign(K, unknown_size);

    std::vector<bool> listed(K, false);
    if (sizes.contains("known")) {
        if (!sizes["known"].is_object()) throw DataError(sizes_json_path + ": 'known' must be an object");
        for (auto it = sizes["known"].begin(); it != sizes["known"].end(); ++it) {
            std::size_t j;
            try { j = s.column_index(it.key()); }
            catch (const DataError&) {
                throw DataError(sizes_json_path + ": sizes list '" + it.key() +
                                "' but the survey has no such column");
            }
            if (!it.value().is_number_integer())
                throw DataError(sizes_json_path + ": size of '" + it.key() + "' must be an integer");
            s.known_size[j] = it.value().get<long long>();
            listed[j] = true;
        }
    }
    if (sizes.contains("unknown")) {
        if (!sizes["unknown"].is_array()) throw DataError(sizes_json_path + ": 'unknown' must be an array");
        for (const auto& name : sizes["unknown"]) {
            std::size_t j;
            try { j = s.column_index(name.get<std::string>()); }
            catch (const DataError&) {
                throw DataError(sizes_json_path + ": sizes list '" + name.get<std::string>() +
                                "' but the survey has no such column");
            }
            if (listed[j])
                throw DataError(sizes_json_path + ": column '" + s.column_names[j] +
                                "' appears as both known and unknown");
            listed[j] = true;
        }
    }
    for (std::size_t j = 0; j < K; ++j)
        if (!listed[j])
            throw DataError(sizes_json_path + ": survey column '" + column_names[j] +
                            "' is not listed in the sizes file");

    if (any_likert || sizes.contains("likert_upper_bound")) {
        s.likert_upper.assign(K, 0);
        if (sizes.contains("likert_upper_bound")) {
            if (!sizes["likert_upper_bound"].is_object())
                throw DataError(sizes_json_path + ": 'likert_upper_bound' must be an object");
            for (auto it = sizes["likert_upper_bound"].begin(); it != sizes["likert_upper_bound"].end(); ++it) {
                const std::size_t j = s.column_index(it.key());
                s.likert_upper[j] = it.value().get<int>();
            }
        }
        if (any_likert && s.likert.empty()) s.likert.assign(s.n(), std::vector<int>(K, missing_response));
    }

    const ValidationReport rep = validate(s);
    if (!rep.ok()) throw DataError("loaded survey failed validation:\n" + rep.to_string());
    return s;
}

inline void save_survey(const ArdSurvey& s, const std::string& survey_csv_path,
                        const std::string& sizes_json_path) {
    std::ostringstream csv;
    csv << "respondent_id";
    for (const auto& name : s.column_names) csv << "," << name;
    if (s.has_weights()) csv << ",weight";
    std::vector<std::size_t> likert_cols;
    if (!s.likert.empty())
        for (std::size_t j = 0; j < s.k(); ++j)
            if (j < s.likert_upper.size() && s.likert_upper[j] > 0) {
                likert_cols.push_back(j);
                csv << ",likert:" << s.column_names[j];
            }
    for (const auto& cn : s.covariate_names) csv << ",cov:" << cn;
    csv << "\n";

    for (std::size_t i = 0; i < s.n(); ++i) {
        csv << s.respondent_label(i);
        for (std::size_t j = 0; j < s.k(); ++j) {
            csv << ",";
            if (s.responses[i][j] != missing_response) csv << s.responses[i][j];
        }
        if (s.has_weights()) csv << "," << detail::format_double(s.weights[i]);
        for (std::size_t j : likert_cols) {
            csv << ",";
            if (s.likert[i][j] != missing_response) csv << s.likert[i][j];
        }
        for (std::size_t p = 0; p < s.covariate_names.size(); ++p)
            csv << "," << detail::format_double(s.covariates[i][p]);
        csv << "\n";
    }
    detail::write_file(survey_csv_path, csv.str());

    Json sizes = Json::object();
    sizes["population_total"] = s.population_total;
    Json known = Json::object();
    for (std::size_t j = 0; j < s.k(); ++j)
        if (s.is_known(j)) known[s.column_names[j]] = s.known_size[j];
    sizes["known"] = known;
    Json unknown = Json::array();
    for (std::size_t j : s.unknown_columns()) unknown.push_back(s.column_names[j]);
    sizes["unknown"] = unknown;
    if (!s.likert_upper.empty()) {
        Json bounds = Json::object();
        bool any = false;
        for (std::size_t j = 0; j < s.k(); ++j)
            if (s.likert_upper[j] > 0) { bounds[s.column_names[j]] = s.likert_upper[j]; any = true; }
        if (any) sizes["likert_upper_bound"] = bounds;
    }
    detail::write_file(sizes_json_path, sizes.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Enriched reports CSV
// ---------------------------------------------------------------------------

inline EnrichedArd load_enriched(const std::string& path, long long frame_total) {
    const auto lines = detail::split_lines(detail::read_file(path));
    if (lines.empty()) throw DataError(path + ": file holds no rows");
    const auto header = detail::split_fields(lines[0]);
    const std::vector<std::string> expected = {"member_id", "out_reports", "aware_counts", "inclusion_prob"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
        throw DataError(path + ": header must be 'member_id,out_reports,aware_counts,inclusion_prob'");

    EnrichedArd e;
    e.frame_total = frame_total;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto toks = detail::split_fields(lines[li]);
        if (toks.size() != 4)
            throw DataError(path + ": line " + std::to_string(li + 1) + " has wrong field count");
        e.member_ids.push_back(toks[0]);
        const long long outr = detail::parse_count(toks[1], li + 1, "out_reports");
        const long long aware = detail::parse_count(toks[2], li + 1, "aware_counts");
        const double pi = detail::parse_real(toks[3], li + 1, "inclusion_prob");
        if (aware > outr)
            throw DataError(path + ": line " + std::to_string(li + 1) +
                            ": aware_counts exceeds out_reports");
        if (!(pi > 0.0) || pi > 1.0)
            throw DataError(path + ": line " + std::to_string(li + 1) +
                            ": inclusion_prob must lie in (0, 1]");
        e.out_reports.push_back(outr);
        e.aware_counts.push_back(aware);
        e.inclusion_probs.push_back(pi);
    }
    return e;
}

inline void save_enriched(const EnrichedArd& e, const std::string& path) {
    std::ostringstream csv;
    csv << "member_id,out_reports,aware_counts,inclusion_prob\n";
    for (std::size_t i = 0; i < e.m(); ++i) {
        csv << (i < e.member_ids.size() ? e.member_ids[i] : std::to_string(i)) << ","
            << e.out_reports[i] << "," << e.aware_counts[i] << ","
            << detail::format_double(e.inclusion_probs[i]) << "\n";
    }
    detail::write_file(path, csv.str());
}

} // namespace scaleup
