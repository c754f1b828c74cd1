#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scaleup/calibrate.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"
#include "scaleup/survey_io.hpp"

// Ground-truth world generator.  A world fixes the population, the true
// subpopulation memberships and every respondent's true network size; the
// reporting pipeline then layers distortions on top:
//
//   true contact rate p = size/N
//     -> barrier: per-tie propensity q ~ Beta(mean p, dispersion rho)
//     -> recall: p' = exp(curve(log q)) for a distortion curve on log scale
//     -> counts: y ~ Binomial(round(d_i), p')   (or gamma-mixed Poisson
//        when the mixing model is overdispersed)
//     -> transmission: y ~ Binomial(y, tau)     (respondent unaware of some)
//     -> response: zero inflation, then heaping to the nearest multiple
//
// Every stage draws from its own named stream per column, so switching one
// stage on or off never changes the draws of another stage or column.

namespace scaleup {

struct SubpopSpec {
    std::string name;
    long long size = 0;
    bool known = true;
};

struct DegreeModel {
    enum class Kind { constant, lognormal } kind = Kind::lognormal;
    double constant_degree = 150.0;
    double mu = 5.0;      // mean of log degree
    double sigma = 1.0;   // sd of log degree
};

struct MixingModel {
    enum class Kind { uniform, overdispersed } kind = Kind::uniform;
    std::map<std::string, double> omega;  // variance inflation per subpop

    double omega_of(const std::string& name) const {
        const auto it = omega.find(name);
        return it == omega.end() ? 1.0 : it->second;
    }
};

struct ResponseBias {
    std::map<std::string, double> zero_inflation;  // extra P(report 0) per subpop
    bool rounding = false;
    int rounding_threshold = 10;  // counts above this get heaped
    int rounding_multiple = 5;
};

struct BiasConfig {
    std::map<std::string, double> transmission;        // tau per subpop (default 1)
    std::map<std::string, double> barrier_dispersion;  // rho per subpop (default off)
    std::optional<std::pair<double, double>> recall;   // curve (a, b) on log scale
    ResponseBias response;

    double tau_of(const std::string& name) const {
        const auto it = transmission.find(name);
        return it == transmission.end() ? 1.0 : it->second;
    }
    double rho_of(const std::string& name) const {
        const auto it = barrier_dispersion.find(name);
        return it == barrier_dispersion.end() ? 0.0 : it->second;
    }
    double zero_of(const std::string& name) const {
        const auto it = response.zero_inflation.find(name);
        return it == response.zero_inflation.end() ? 0.0 : it->second;
    }
    bool any() const {
        return !transmission.empty() || !barrier_dispersion.empty() || recall.has_value() ||
               !response.zero_inflation.empty() || response.rounding;
    }
};

struct WorldConfig {
    long long population_total = 100000;
    std::vector<SubpopSpec> subpops;
    DegreeModel degree;
    MixingModel mixing;
    std::size_t sample_size = 500;
    long long enriched_sample_size = 0;  // 0: none; -1: every hidden member
    std::uint64_t seed = 1;
};

struct SyntheticWorld {
    WorldConfig config;
    std::vector<double> degrees;                      // respondents' true degrees
    std::vector<std::vector<int>> memberships;        // per subpop, population ids

    long long true_size(const std::string& name) const {
        for (const auto& sp : config.subpops)
            if (sp.name == name) return sp.size;
        throw DataError("world has no subpopulation named '" + name + "'");
    }
};

struct GeneratedArd {
    ArdSurvey survey;
    std::optional<EnrichedArd> enriched;
    BiasConfig bias;
};

// ---------------------------------------------------------------------------
// World generation
// ---------------------------------------------------------------------------

inline void validate_world(const WorldConfig& cfg) {
    if (cfg.population_total <= 0) throw DataError("population_total must be positive");
    if (cfg.subpops.empty()) throw DataError("a world needs at least one subpopulation");
    std::map<std::string, int> seen;
    for (const auto& sp : cfg.subpops) {
        if (sp.name.empty()) throw DataError("subpopulation names must be nonempty");
        if (++seen[sp.name] > 1) throw DataError("duplicate subpopulation '" + sp.name + "'");
        if (sp.size <= 0 || sp.size >= cfg.population_total)
            throw DataError("size of '" + sp.name + "' must lie strictly between 0 and N");
    }
    if (cfg.sample_size == 0 ||
        cfg.sample_size > static_cast<std::size_t>(cfg.population_total))
        throw DataError("sample_size must lie in [1, population_total]");
    if (cfg.degree.kind == DegreeModel::Kind::constant && cfg.degree.constant_degree <= 0.0)
        throw DataError("constant degree must be positive");
    if (cfg.degree.kind == DegreeModel::Kind::lognormal && cfg.degree.sigma < 0.0)
        throw DataError("degree sigma must be nonnegative");
    for (const auto& [name, om] : cfg.mixing.omega) {
        if (om < 1.0) throw DataError("mixing omega for '" + name + "' must be >= 1");
        if (seen.find(name) == seen.end())
            throw DataError("mixing lists unknown subpopulation '" + name + "'");
    }
}

inline double draw_degree(Rng& rng, const DegreeModel& dm) {
    if (dm.kind == DegreeModel::Kind::constant) return dm.constant_degree;
    return std::exp(rnorm(rng, dm.mu, dm.sigma));
}

// Respondents are population ids 0..n-1; with exchangeable degrees and
// uniform mixing this is a uniform sample of the frame.
inline SyntheticWorld generate_world(const WorldConfig& cfg) {
    validate_world(cfg);
    SyntheticWorld w;
    w.config = cfg;

    Rng deg_rng = make_rng(cfg.seed, "degrees");
    w.degrees.resize(cfg.sample_size);
    for (auto& d : w.degrees) d = draw_degree(deg_rng, cfg.degree);

    w.memberships.resize(cfg.subpops.size());
    for (std::size_t j = 0; j < cfg.subpops.size(); ++j) {
        Rng mem_rng = make_rng(cfg.seed, "members", j);
        w.memberships[j] = sample_without_replacement(
            static_cast<int>(cfg.population_total),
            static_cast<int>(cfg.subpops[j].size), mem_rng);
        std::sort(w.memberships[j].begin(), w.memberships[j].end());
    }
    return w;
}

// ---------------------------------------------------------------------------
// Reporting pipeline stages (exposed so their composition is testable)
// ---------------------------------------------------------------------------

// Base count of contacts with a group of prevalence p_eff for one person.
inline long long draw_base_count(Rng& rng, double degree, double p_eff, double omega) {
    const long long trials = std::llround(degree);
    if (omega <= 1.0) return rbinom(rng, trials, p_eff);
    const double mu = static_cast<double>(trials) * p_eff;
    if (mu <= 0.0) return 0;
    // gamma-mixed Poisson with mean mu and variance omega * mu
    const double lambda = rgamma(rng, mu / (omega - 1.0), omega - 1.0);
    return rpois(rng, lambda);
}

inline void apply_transmission(std::vector<long long>& counts, double tau, Rng& rng) {
    if (tau >= 1.0) return;
    for (auto& y : counts) y = rbinom(rng, y, tau);
}

inline void apply_zero_inflation(std::vector<long long>& counts, double prob, Rng& rng) {
    if (prob <= 0.0) return;
    for (auto& y : counts)
        if (runif(rng) < prob) y = 0;
}

inline long long heap_count(long long y, const ResponseBias& rb) {
    if (!rb.rounding || y <= rb.rounding_threshold) return y;
    const double m = static_cast<double>(rb.rounding_multiple);
    return std::llround(static_cast<double>(y) / m) * rb.rounding_multiple;
}

// Effective per-tie probability after barrier and recall distortion.
inline double effective_rate(Rng& barrier_rng, double p, double rho,
                             const std::optional<std::pair<double, double>>& recall) {
    double q = p;
    if (rho > 0.0) {
        const BetaShapes sh = beta_shapes_from_mean_disp(p, rho);
        q = rbeta(barrier_rng, sh.a, sh.b);
    }
    if (recall) {
        const CalibrationCurve curve{recall->first, recall->second, "simulated"};
        q = std::min(1.0, std::exp(curve_value(curve, std::log(q))));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Survey generation
// ---------------------------------------------------------------------------

inline EnrichedArd build_enriched(const SyntheticWorld& w, const BiasConfig& bias,
                                  const std::vector<std::vector<long long>>& aware);

inline GeneratedArd generate_ard(const SyntheticWorld& w, const BiasConfig& bias = {}) {
    const WorldConfig& cfg = w.config;
    for (const auto& [name, v] : bias.transmission) {
        w.true_size(name);
        if (v <= 0.0 || v > 1.0) throw DataError("transmission for '" + name + "' must lie in (0,1]");
    }
    for (const auto& [name, v] : bias.barrier_dispersion) {
        w.true_size(name);
        if (v < 0.0 || v >= 1.0) throw DataError("barrier dispersion for '" + name + "' must lie in [0,1)");
    }
    for (const auto& [name, v] : bias.response.zero_inflation) {
        w.true_size(name);
        if (v < 0.0 || v >= 1.0) throw DataError("zero inflation for '" + name + "' must lie in [0,1)");
    }

    const std::size_t n = cfg.sample_size;
    const std::size_t K = cfg.subpops.size();
    const double N = static_cast<double>(cfg.population_total);

    GeneratedArd out;
    out.bias = bias;
    ArdSurvey& s = out.survey;
    s.population_total = cfg.population_total;
    for (const auto& sp : cfg.subpops) {
        s.column_names.push_back(sp.name);
        s.known_size.push_back(sp.known ? sp.size : unknown_size);
    }
    s.responses.assign(n, std::vector<int>(K, 0));
    s.respondent_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.respondent_ids[i] = "r" + std::to_string(i);

    // Post-transmission (true awareness) counts per column, kept for the
    // enriched pass so both views of the hidden ties agree exactly.
    std::vector<std::vector<long long>> aware(K);

    for (std::size_t kcol = 0; kcol < K; ++kcol) {
        const SubpopSpec& sp = cfg.subpops[kcol];
        const double p = static_cast<double>(sp.size) / N;
        const double rho = bias.rho_of(sp.name);
        const double omega = cfg.mixing.kind == MixingModel::Kind::overdispersed
                                 ? cfg.mixing.omega_of(sp.name) : 1.0;

        Rng barrier_rng = make_rng(cfg.seed, "barrier:" + sp.name);
        Rng count_rng = make_rng(cfg.seed, "counts:" + sp.name);
        std::vector<long long> col(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = effective_rate(barrier_rng, p, rho, bias.recall);
            col[i] = draw_base_count(count_rng, w.degrees[i], q, omega);
        }

        const double tau = bias.tau_of(sp.name);
        if (tau < 1.0) {
            Rng thin_rng = make_rng(cfg.seed, "transmission:" + sp.name);
            apply_transmission(col, tau, thin_rng);
        }
        aware[kcol] = col;

        const double zi = bias.zero_of(sp.name);
        if (zi > 0.0) {
            Rng zero_rng = make_rng(cfg.seed, "zero:" + sp.name);
            apply_zero_inflation(col, zi, zero_rng);
        }
        for (std::size_t i = 0; i < n; ++i)
            s.responses[i][kcol] = static_cast<int>(std::min<long long>(
                heap_count(col[i], bias.response), cfg.population_total));
    }

    if (cfg.enriched_sample_size != 0)
        out.enriched = build_enriched(w, bias, aware);
    return out;
}

// Enriched reports for the first unknown subpopulation: every frame member
// (not just surveyed respondents) forms ties to hidden members; each tie is
// assigned to a uniformly chosen member, and the tie is "aware" with the
// same transmission thinning that shaped the survey column.  Respondents
// reuse the exact counts behind their survey answers, so a census frame
// reproduces sum(y_u) = sum(aware in-reports) identically.
inline EnrichedArd build_enriched(const SyntheticWorld& w, const BiasConfig& bias,
                                  const std::vector<std::vector<long long>>& aware) {
    const WorldConfig& cfg = w.config;
    std::size_t ucol = cfg.subpops.size();
    for (std::size_t j = 0; j < cfg.subpops.size(); ++j)
        if (!cfg.subpops[j].known) { ucol = j; break; }
    if (ucol == cfg.subpops.size())
        throw DataError("enriched reports need an unknown subpopulation");
    const SubpopSpec& sp = cfg.subpops[ucol];
    const std::vector<int>& hidden = w.memberships[ucol];
    const std::size_t H = hidden.size();
    const std::size_t n = cfg.sample_size;
    const double N = static_cast<double>(cfg.population_total);
    const double p = static_cast<double>(sp.size) / N;
    const double rho = bias.rho_of(sp.name);
    const double tau = bias.tau_of(sp.name);
    const double omega = cfg.mixing.kind == MixingModel::Kind::overdispersed
                             ? cfg.mixing.omega_of(sp.name) : 1.0;

    std::vector<long long> out_reports(H, 0), aware_counts(H, 0);
    Rng edge_rng = make_rng(cfg.seed, "edges:" + sp.name);

    // Frame members beyond the surveyed ones get fresh degrees and counts
    // from dedicated streams; surveyed respondents reuse their survey draws.
    Rng frame_deg_rng = make_rng(cfg.seed, "degrees-frame");
    Rng frame_barrier_rng = make_rng(cfg.seed, "barrier-frame:" + sp.name);
    Rng frame_count_rng = make_rng(cfg.seed, "counts-frame:" + sp.name);
    Rng frame_thin_rng = make_rng(cfg.seed, "transmission-frame:" + sp.name);

    const long long frame_total = cfg.population_total;
    for (long long member = 0; member < frame_total; ++member) {
        long long ties = 0, aware_ties = 0;
        if (member < static_cast<long long>(n)) {
            // survey columns store pre-zero-inflation awareness
            aware_ties = aware[ucol][static_cast<std::size_t>(member)];
            ties = aware_ties;
            if (tau < 1.0) {
                // The survey pass kept only the aware tie count; restore the
                // unaware remainder so out_reports >= aware_counts stays
                // honest.  Under binomial mixing the exact conditional law is
                // Binom(round(d) - aware, q(1-tau)/(1-q tau)); under the
                // gamma-mixed model we approximate with an independent draw.
                // Only aware in-ties feed the estimator either way.
                const double deg = w.degrees[static_cast<std::size_t>(member)];
                const double q = effective_rate(frame_barrier_rng, p, rho, bias.recall);
                long long extra = 0;
                if (omega <= 1.0) {
                    const long long room = std::max<long long>(0, std::llround(deg) - aware_ties);
                    extra = rbinom(frame_count_rng, room, q * (1.0 - tau) / (1.0 - q * tau));
                } else {
                    extra = draw_base_count(frame_count_rng, deg, q * (1.0 - tau), omega);
                }
                ties = aware_ties + extra;
            }
        } else {
            const double deg = draw_degree(frame_deg_rng, cfg.degree);
            const double q = effective_rate(frame_barrier_rng, p, rho, bias.recall);
            ties = draw_base_count(frame_count_rng, deg, q, omega);
            aware_ties = (tau < 1.0) ? rbinom(frame_thin_rng, ties, tau) : ties;
        }
        for (long long e = 0; e < ties; ++e) {
            const std::size_t h = static_cast<std::size_t>(
                std::uniform_int_distribution<std::size_t>(0, H - 1)(edge_rng));
            ++out_reports[h];
            if (e < aware_ties) ++aware_counts[h];
        }
    }

    EnrichedArd enr;
    enr.frame_total = frame_total;
    long long m = cfg.enriched_sample_size;
    if (m < 0 || m >= static_cast<long long>(H)) {
        enr.out_reports = out_reports;
        enr.aware_counts = aware_counts;
        enr.inclusion_probs.assign(H, 1.0);
        enr.member_ids.resize(H);
        for (std::size_t h = 0; h < H; ++h) enr.member_ids[h] = "h" + std::to_string(hidden[h]);
    } else {
        Rng sample_rng = make_rng(cfg.seed, "enriched-sample");
        std::vector<int> idx = sample_without_replacement(static_cast<int>(H),
                                                          static_cast<int>(m), sample_rng);
        std::sort(idx.begin(), idx.end());
        const double pi = static_cast<double>(m) / static_cast<double>(H);
        for (int h : idx) {
            enr.out_reports.push_back(out_reports[static_cast<std::size_t>(h)]);
            enr.aware_counts.push_back(aware_counts[static_cast<std::size_t>(h)]);
            enr.inclusion_probs.push_back(pi);
            enr.member_ids.push_back("h" + std::to_string(hidden[static_cast<std::size_t>(h)]));
        }
    }
    return enr;
}

// ---------------------------------------------------------------------------
// Scenario (de)serialisation
// ---------------------------------------------------------------------------

struct Scenario {
    std::string name = "scenario";
    WorldConfig world;
    BiasConfig bias;
};

inline Json scenario_to_json(const Scenario& sc) {
    Json j = Json::object();
    j["name"] = sc.name;
    j["population_total"] = sc.world.population_total;
    Json subs = Json::array();
    for (const auto& sp : sc.world.subpops)
        subs.push_back({{"name", sp.name}, {"size", sp.size}, {"known", sp.known}});
    j["subpops"] = subs;
    if (sc.world.degree.kind == DegreeModel::Kind::constant)
        j["degree"] = {{"kind", "constant"}, {"value", sc.world.degree.constant_degree}};
    else
        j["degree"] = {{"kind", "lognormal"}, {"mu", sc.world.degree.mu}, {"sigma", sc.world.degree.sigma}};
    if (sc.world.mixing.kind == MixingModel::Kind::overdispersed)
        j["mixing"] = {{"kind", "overdispersed"}, {"omega", sc.world.mixing.omega}};
    else
        j["mixing"] = {{"kind", "uniform"}};
    j["sample_size"] = sc.world.sample_size;
    if (sc.world.enriched_sample_size != 0)
        j["enriched_sample_size"] = sc.world.enriched_sample_size;
    j["seed"] = sc.world.seed;

    Json b = Json::object();
    if (!sc.bias.transmission.empty()) b["transmission"] = sc.bias.transmission;
    if (!sc.bias.barrier_dispersion.empty()) b["barrier_dispersion"] = sc.bias.barrier_dispersion;
    if (sc.bias.recall) b["recall"] = {{"a", sc.bias.recall->first}, {"b", sc.bias.recall->second}};
    if (!sc.bias.response.zero_inflation.empty())
        b["zero_inflation"] = sc.bias.response.zero_inflation;
    if (sc.bias.response.rounding)
        b["rounding"] = {{"threshold", sc.bias.response.rounding_threshold},
                         {"multiple", sc.bias.response.rounding_multiple}};
    if (!b.empty()) j["bias"] = b;
    return j;
}

inline Scenario scenario_from_json(const Json& j) {
    if (!j.is_object()) throw DataError("scenario must be a JSON object");
    Scenario sc;
    try {
        if (j.contains("name")) sc.name = j.at("name").get<std::string>();
        sc.world.population_total = j.at("population_total").get<long long>();
        for (const auto& sp : j.at("subpops")) {
            SubpopSpec spec;
            spec.name = sp.at("name").get<std::string>();
            spec.size = sp.at("size").get<long long>();
            spec.known = sp.value("known", true);
            sc.world.subpops.push_back(spec);
        }
        if (j.contains("degree")) {
            const auto& d = j.at("degree");
            const std::string kind = d.at("kind").get<std::string>();
            if (kind == "constant") {
                sc.world.degree.kind = DegreeModel::Kind::constant;
                sc.world.degree.constant_degree = d.at("value").get<double>();
            } else if (kind == "lognormal") {
                sc.world.degree.kind = DegreeModel::Kind::lognormal;
                sc.world.degree.mu = d.at("mu").get<double>();
                sc.world.degree.sigma = d.at("sigma").get<double>();
            } else {
                throw DataError("unknown degree kind '" + kind + "'");
            }
        }
        if (j.contains("mixing")) {
            const auto& m = j.at("mixing");
            const std::string kind = m.at("kind").get<std::string>();
            if (kind == "overdispersed") {
                sc.world.mixing.kind = MixingModel::Kind::overdispersed;
                if (m.contains("omega"))
                    sc.world.mixing.omega = m.at("omega").get<std::map<std::string, double>>();
            } else if (kind != "uniform") {
                throw DataError("unknown mixing kind '" + kind + "'");
            }
        }
        sc.world.sample_size = j.at("sample_size").get<std::size_t>();
        sc.world.enriched_sample_size = j.value("enriched_sample_size", 0LL);
        sc.world.seed = j.value("seed", std::uint64_t{1});

        if (j.contains("bias")) {
            const auto& b = j.at("bias");
            if (b.contains("transmission"))
                sc.bias.transmission = b.at("transmission").get<std::map<std::string, double>>();
            if (b.contains("barrier_dispersion"))
                sc.bias.barrier_dispersion =
                    b.at("barrier_dispersion").get<std::map<std::string, double>>();
            if (b.contains("recall"))
                sc.bias.recall = {b.at("recall").at("a").get<double>(),
                                  b.at("recall").at("b").get<double>()};
            if (b.contains("zero_inflation"))
                sc.bias.response.zero_inflation =
                    b.at("zero_inflation").get<std::map<std::string, double>>();
            if (b.contains("rounding")) {
                sc.bias.response.rounding = true;
                sc.bias.response.rounding_threshold = b.at("rounding").value("threshold", 10);
                sc.bias.response.rounding_multiple = b.at("rounding").value("multiple", 5);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed scenario: ") + e.what());
    }
    validate_world(sc.world);
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    return scenario_from_json(detail::parse_json_file(path));
}

} // namespace scaleup
