#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scaleup/benchmark.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/loo.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"
#include "scaleup/survey_io.hpp"

// Stable renderings of results: estimate records as JSON, posterior draws and
// tables as flat CSV, and a run manifest that fingerprints the configuration
// and every produced file.  All real numbers go through the shortest
// round-tripping decimal form, so rendering is reproducible byte for byte.

#ifndef SCALEUP_VERSION
#define SCALEUP_VERSION "unversioned"
#endif

namespace scaleup {

namespace detail {

// JSON has no representation for non-finite reals; emit null instead.
inline Json json_real(double x) {
    return std::isfinite(x) ? Json(x) : Json(nullptr);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Estimate records
// ---------------------------------------------------------------------------

inline Json estimate_to_json(const SizeEstimate& est) {
    Json j = Json::object();
    j["method"] = est.method;
    j["point"] = detail::json_real(est.point);
    j["se"] = est.se ? detail::json_real(*est.se) : Json(nullptr);
    j["ci"] = est.interval ? Json::array({detail::json_real(est.interval->first),
                                          detail::json_real(est.interval->second)})
                           : Json(nullptr);
    j["calibrations_applied"] = est.calibrations_applied;
    j["metadata"] = est.metadata;
    return j;
}

inline SizeEstimate estimate_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("method") || !j.contains("point"))
        throw DataError("malformed estimate record: expected an object with 'method' and 'point'");
    SizeEstimate est;
    est.method = j.at("method").get<std::string>();
    est.point = j.at("point").get<double>();
    if (j.contains("se") && !j.at("se").is_null()) est.se = j.at("se").get<double>();
    if (j.contains("ci") && !j.at("ci").is_null()) {
        const Json& ci = j.at("ci");
        if (!ci.is_array() || ci.size() != 2 || !ci[0].is_number() || !ci[1].is_number())
            throw DataError("malformed estimate record: 'ci' must be [low, high]");
        est.interval = {ci[0].get<double>(), ci[1].get<double>()};
    }
    if (j.contains("calibrations_applied"))
        est.calibrations_applied = j.at("calibrations_applied").get<std::vector<std::string>>();
    if (j.contains("metadata") && !j.at("metadata").is_null()) est.metadata = j.at("metadata");
    return est;
}

// ---------------------------------------------------------------------------
// Posterior draws and diagnostics
// ---------------------------------------------------------------------------

inline std::string draws_to_csv(const PosteriorDraws& draws) {
    std::ostringstream out;
    out << "chain,iter,param,value\n";
    for (std::size_t c = 0; c < draws.n_chains(); ++c)
        for (std::size_t t = 0; t < draws.draws_per_chain(); ++t)
            for (std::size_t p = 0; p < draws.n_params(); ++p)
                out << c << ',' << t << ',' << draws.param_names[p] << ','
                    << detail::format_double(draws.values[p][c][t]) << "\n";
    return out.str();
}

inline PosteriorDraws draws_from_csv(const std::string& text) {
    const auto lines = detail::split_lines(text);
    if (lines.empty() || lines[0] != "chain,iter,param,value")
        throw DataError("malformed draws file: expected header 'chain,iter,param,value'");
    PosteriorDraws draws;
    std::map<std::string, std::size_t> index;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = detail::split_fields(lines[li]);
        if (f.size() != 4)
            throw DataError("malformed draws file: line " + std::to_string(li + 1) +
                            " has " + std::to_string(f.size()) + " fields, expected 4");
        const long long chain = detail::parse_count(f[0], li + 1, "chain");
        const double value = detail::parse_real(f[3], li + 1, "value");
        if (chain < 0) throw DataError("malformed draws file: negative chain index");
        auto [it, fresh] = index.try_emplace(f[2], draws.param_names.size());
        if (fresh) {
            draws.param_names.push_back(f[2]);
            draws.values.emplace_back();
        }
        auto& per_chain = draws.values[it->second];
        if (per_chain.size() <= static_cast<std::size_t>(chain))
            per_chain.resize(static_cast<std::size_t>(chain) + 1);
        per_chain[static_cast<std::size_t>(chain)].push_back(value);
    }
    if (draws.param_names.empty()) throw DataError("malformed draws file: no draws");
    const auto& first = draws.values[0];
    for (const auto& per_chain : draws.values) {
        if (per_chain.size() != first.size())
            throw DataError("malformed draws file: parameters disagree on the chain count");
        for (std::size_t c = 0; c < per_chain.size(); ++c)
            if (per_chain[c].size() != first[0].size())
                throw DataError("malformed draws file: ragged draw counts across chains");
    }
    return draws;
}

inline std::string diagnostics_to_csv(const ChainDiagnostics& diag) {
    std::ostringstream out;
    out << "param,rhat,ess\n";
    for (const auto& p : diag.params)
        out << p.name << ',' << detail::format_double(p.rhat) << ','
            << detail::format_double(p.ess) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Leave-one-out tables and the trimming log
// ---------------------------------------------------------------------------

inline std::string loo_to_csv(const std::vector<LooRow>& rows) {
    std::ostringstream out;
    out << "subpop,known_size,backestimate,ratio,log_ratio\n";
    for (const auto& r : rows)
        out << r.name << ',' << r.known_size << ',' << detail::format_double(r.backestimate)
            << ',' << detail::format_double(r.ratio) << ',' << detail::format_double(r.log_ratio)
            << "\n";
    return out.str();
}

inline Json loo_row_to_json(const LooRow& r) {
    Json j = Json::object();
    j["subpop"] = r.name;
    j["known_size"] = r.known_size;
    j["backestimate"] = detail::json_real(r.backestimate);
    j["ratio"] = detail::json_real(r.ratio);
    j["log_ratio"] = detail::json_real(r.log_ratio);
    j["se_log"] = detail::json_real(r.se_log);
    return j;
}

inline Json trim_log_to_json(const TrimResult& trim) {
    Json j = Json::object();
    Json rounds = Json::array();
    for (const auto& round : trim.rounds) {
        Json r = Json::object();
        r["removed_column"] = round.removed_column;
        r["log_ratio"] = detail::json_real(round.log_ratio);
        Json table = Json::array();
        for (const auto& row : round.table) table.push_back(loo_row_to_json(row));
        r["table"] = table;
        rounds.push_back(std::move(r));
    }
    j["rounds"] = std::move(rounds);
    j["remaining_columns"] = trim.survey.column_names;
    return j;
}

// ---------------------------------------------------------------------------
// Benchmark tables
// ---------------------------------------------------------------------------

inline std::string benchmark_to_csv(const BenchmarkResult& res) {
    std::ostringstream out;
    out << "scenario,estimator,replicate,point,truth,rel_error,covered\n";
    for (const auto& cell : res.cells) {
        out << cell.scenario << ',' << cell.estimator << ',' << cell.replicate << ',';
        if (cell.error.empty())
            out << detail::format_double(cell.point) << ','
                << detail::format_double(cell.truth) << ','
                << detail::format_double(cell.rel_error) << ',';
        else
            out << ',' << detail::format_double(cell.truth) << ",,";
        if (cell.covered) out << (*cell.covered ? 1 : 0);
        out << "\n";
    }
    return out.str();
}

inline Json benchmark_summaries_to_json(const BenchmarkResult& res) {
    Json arr = Json::array();
    for (const auto& s : res.summaries) {
        Json j = Json::object();
        j["scenario"] = s.scenario;
        j["estimator"] = s.estimator;
        j["replicates"] = s.replicates;
        j["failures"] = s.failures;
        j["median_rel_error"] = detail::json_real(s.median_rel_error);
        j["median_abs_rel_error"] = detail::json_real(s.median_abs_rel_error);
        j["sd_point"] = detail::json_real(s.sd_point);
        j["coverage"] = s.coverage ? detail::json_real(*s.coverage) : Json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline std::string content_digest(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

// Fingerprint of one run: the command, a digest of its full configuration,
// the seed, library versions, and a digest per produced file.  The timestamp
// is off by default so reruns stay byte-identical.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> versions;
    std::optional<std::string> generated_at;
    std::vector<std::pair<std::string, std::string>> outputs;  // (path, digest)
};

inline RunManifest make_manifest(const std::string& command, const Json& config,
                                 std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.config_digest = content_digest(config.dump());
    m.seed = seed;
    m.versions["scaleup"] = SCALEUP_VERSION;
    return m;
}

inline void manifest_record_output(RunManifest& m, const std::string& path,
                                   std::string_view bytes) {
    m.outputs.emplace_back(path, content_digest(bytes));
}

inline Json manifest_to_json(const RunManifest& m) {
    Json j = Json::object();
    j["command"] = m.command;
    j["config_digest"] = m.config_digest;
    j["seed"] = m.seed;
    j["versions"] = m.versions;
    j["generated_at"] = m.generated_at ? Json(*m.generated_at) : Json(nullptr);
    Json outs = Json::array();
    for (const auto& [path, digest] : m.outputs)
        outs.push_back({{"path", path}, {"digest", digest}});
    j["outputs"] = std::move(outs);
    return j;
}

} // namespace scaleup
