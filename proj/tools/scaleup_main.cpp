// Command-line front end: estimation, simulation, calibration, diagnostics,
// and estimator benchmarking over ARD surveys.  Machine-readable results go
// to standard output, human commentary to standard error; every file-writing
// run leaves a manifest fingerprinting its inputs, flags, and outputs.
//
// Exit codes: 0 success, 1 data or model error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scaleup/benchmark.hpp"
#include "scaleup/calibrate.hpp"
#include "scaleup/classic.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/loo.hpp"
#include "scaleup/mcmc.hpp"
#include "scaleup/model_maltiel.hpp"
#include "scaleup/model_overdispersed.hpp"
#include "scaleup/model_teo.hpp"
#include "scaleup/serialize.hpp"
#include "scaleup/simulate.hpp"
#include "scaleup/survey_io.hpp"

namespace {

using namespace scaleup;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct CommonFlags {
    std::string survey_path;
    std::string sizes_path;
    std::string unknown_name;
    std::uint64_t seed = 20250801;
    unsigned threads = 0;
    std::string out_dir;
};

struct McmcFlags {
    int chains = 4;
    int burnin = 2000;
    int keep = 2000;
    int thin = 1;
};

void add_mcmc_flags(CLI::App* cmd, McmcFlags& f) {
    cmd->add_option("--chains", f.chains, "number of chains")->check(CLI::PositiveNumber);
    cmd->add_option("--burnin", f.burnin, "burn-in sweeps per chain")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--keep", f.keep, "retained draws per chain")->check(CLI::PositiveNumber);
    cmd->add_option("--thin", f.thin, "keep every thin-th sweep")->check(CLI::PositiveNumber);
}

McmcConfig mcmc_config(const McmcFlags& f, const CommonFlags& c) {
    McmcConfig cfg;
    cfg.chains = f.chains;
    cfg.burnin = f.burnin;
    cfg.keep = f.keep;
    cfg.thin = f.thin;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    return cfg;
}

// Collects produced files under --out-dir and finishes with a manifest.
class OutputSink {
  public:
    OutputSink(std::string dir, const std::string& command, const Json& config,
               std::uint64_t seed)
        : dir_(std::move(dir)), manifest_(make_manifest(command, config, seed)) {
        if (!dir_.empty()) fs::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& bytes) {
        if (dir_.empty()) return;
        const std::string path = (fs::path(dir_) / name).string();
        detail::write_file(path, bytes);
        manifest_record_output(manifest_, name, bytes);
    }

    void finish() {
        if (dir_.empty()) return;
        const std::string path = (fs::path(dir_) / "manifest.json").string();
        detail::write_file(path, manifest_to_json(manifest_).dump(2) + "\n");
    }

  private:
    std::string dir_;
    RunManifest manifest_;
};

std::string join_command(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out += ' ';
        out += argv[i];
    }
    return out;
}

// Input files enter the manifest config by content digest, so the config
// digest moves when any input byte changes, not just when paths do.
void config_input(Json& config, const std::string& key, const std::string& path) {
    if (path.empty()) return;
    Json j = Json::object();
    j["path"] = path;
    j["digest"] = content_digest(detail::read_file(path));
    config[key] = std::move(j);
}

std::size_t resolve_unknown(const ArdSurvey& s, const std::string& name) {
    if (!name.empty()) {
        const std::size_t k = s.column_index(name);
        if (s.is_known(k))
            throw UsageError("column '" + name + "' has a known size; --unknown must name an "
                             "unknown column");
        return k;
    }
    const auto unknowns = s.unknown_columns();
    if (unknowns.empty())
        throw DataError("the survey has no unknown column to estimate");
    if (unknowns.size() > 1)
        throw UsageError("the survey has " + std::to_string(unknowns.size()) +
                         " unknown columns; pick one with --unknown");
    return unknowns[0];
}

std::pair<double, double> parse_pair_flag(const std::string& text, const std::string& flag) {
    double a = 0.0, b = 0.0;
    char trail = 0;
    if (std::sscanf(text.c_str(), "%lf,%lf%c", &a, &b, &trail) != 2)
        throw UsageError(flag + " expects two comma-separated numbers, got '" + text + "'");
    return {a, b};
}

void emit(const Json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateFlags {
    CommonFlags common;
    McmcFlags mcmc;
    std::string method;
    std::string enriched_path;
    std::string tau_prior;
    std::vector<std::string> rare;
};

const std::vector<std::string>& estimate_method_labels() {
    static const std::vector<std::string> labels = {
        "pimle", "mle", "mos", "wmle", "wmos", "johnsen", "gnsum", "zheng",
        "maltiel-random", "maltiel-barrier", "maltiel-transmission", "maltiel-combined",
        "teo", "teo-barrier"};
    return labels;
}

int cmd_estimate(const EstimateFlags& f, const std::string& command) {
    const std::string& m = f.method;
    const auto& labels = estimate_method_labels();
    if (std::find(labels.begin(), labels.end(), m) == labels.end()) {
        std::string all;
        for (const auto& l : labels) all += (all.empty() ? "" : ", ") + l;
        throw UsageError("unknown method '" + m + "'; expected one of " + all);
    }

    Json config = Json::object();
    config["subcommand"] = "estimate";
    config["method"] = m;
    config_input(config, "survey", f.common.survey_path);
    config_input(config, "sizes", f.common.sizes_path);
    config_input(config, "enriched", f.enriched_path);
    config["unknown"] = f.common.unknown_name;
    config["seed"] = f.common.seed;
    config["chains"] = f.mcmc.chains;
    config["burnin"] = f.mcmc.burnin;
    config["keep"] = f.mcmc.keep;
    config["thin"] = f.mcmc.thin;
    config["tau_prior"] = f.tau_prior;
    config["rare"] = f.rare;

    const ArdSurvey s = load_survey(f.common.survey_path, f.common.sizes_path);
    const std::size_t ucol = resolve_unknown(s, f.common.unknown_name);

    SizeEstimate est;
    std::optional<PosteriorDraws> draws;

    if (m == "johnsen") {
        est = johnsen_estimate(s, ucol);
    } else if (m == "gnsum") {
        if (f.enriched_path.empty())
            throw UsageError("gnsum needs --enriched with reports from the hidden side");
        const EnrichedArd e = load_enriched(f.enriched_path, s.population_total);
        est = gnsum(s, ucol, e).first;
    } else if (m == "zheng") {
        PosteriorDraws d = fit_overdispersed(s, mcmc_config(f.mcmc, f.common));
        std::vector<std::size_t> rare_cols;
        for (const auto& name : f.rare) rare_cols.push_back(s.column_index(name));
        d = renormalize_betas(d, s, rare_cols);
        d = overdispersed_size_draws(d, s, ucol);
        est = posterior_size(d, m);
        draws = std::move(d);
    } else if (m.rfind("maltiel-", 0) == 0) {
        MaltielVariant variant = MaltielVariant::random_degree;
        if (m == "maltiel-barrier") variant = MaltielVariant::barrier;
        if (m == "maltiel-transmission") variant = MaltielVariant::transmission;
        if (m == "maltiel-combined") variant = MaltielVariant::combined;
        MaltielPriors priors;
        if (!f.tau_prior.empty()) priors.transmission_prior = parse_pair_flag(f.tau_prior, "--tau-prior");
        PosteriorDraws d = fit_maltiel(s, ucol, variant, mcmc_config(f.mcmc, f.common), priors);
        est = posterior_size(d, m);
        draws = std::move(d);
    } else if (m == "teo" || m == "teo-barrier") {
        const TeoVariant variant = m == "teo" ? TeoVariant::plain : TeoVariant::covariate;
        PosteriorDraws d = fit_teo(s, ucol, variant, mcmc_config(f.mcmc, f.common));
        est = posterior_size(d, m);
        draws = std::move(d);
    } else {
        est = classic_estimator(m)(s, ucol);
    }

    const Json out = estimate_to_json(est);
    emit(out);

    OutputSink sink(f.common.out_dir, command, config, f.common.seed);
    sink.write("estimate.json", out.dump(2) + "\n");
    if (draws) {
        const ChainDiagnostics diag = diagnostics(*draws);
        for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";
        sink.write("draws.csv", draws_to_csv(*draws));
        sink.write("diagnostics.csv", diagnostics_to_csv(diag));
    }
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateFlags {
    std::string scenario_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;
};

int cmd_simulate(const SimulateFlags& f, const std::string& command) {
    Scenario sc = load_scenario(f.scenario_path);
    if (f.seed_given) sc.world.seed = f.seed;

    Json config = Json::object();
    config["subcommand"] = "simulate";
    config_input(config, "scenario", f.scenario_path);
    config["seed"] = sc.world.seed;

    const SyntheticWorld world = generate_world(sc.world);
    const GeneratedArd data = generate_ard(world, sc.bias);

    double dmean = 0.0, dss = 0.0;
    for (double d : world.degrees) dmean += d;
    dmean /= static_cast<double>(world.degrees.size());
    for (double d : world.degrees) dss += (d - dmean) * (d - dmean);
    const double dsd = std::sqrt(dss / static_cast<double>(world.degrees.size()));

    Json truth = Json::object();
    truth["name"] = sc.name;
    truth["population_total"] = sc.world.population_total;
    Json unknown = Json::object();
    for (const auto& sp : sc.world.subpops)
        if (!sp.known) unknown[sp.name] = sp.size;
    truth["unknown"] = std::move(unknown);
    truth["degrees"] = {{"mean", dmean}, {"sd", dsd}};
    if (!sc.bias.transmission.empty()) truth["transmission"] = sc.bias.transmission;
    if (!sc.bias.barrier_dispersion.empty())
        truth["barrier_dispersion"] = sc.bias.barrier_dispersion;
    truth["seed"] = sc.world.seed;

    emit(truth);

    OutputSink sink(f.out_dir, command, config, sc.world.seed);

    // save_survey writes two files itself; re-read them so the manifest
    // digests cover exactly what landed on disk.
    const std::string survey_csv = (fs::path(f.out_dir) / "survey.csv").string();
    const std::string sizes_json = (fs::path(f.out_dir) / "sizes.json").string();
    save_survey(data.survey, survey_csv, sizes_json);
    sink.write("truth.json", truth.dump(2) + "\n");
    sink.write("survey.csv", detail::read_file(survey_csv));
    sink.write("sizes.json", detail::read_file(sizes_json));
    if (data.enriched) {
        const std::string enriched_csv = (fs::path(f.out_dir) / "enriched.csv").string();
        save_enriched(*data.enriched, enriched_csv);
        sink.write("enriched.csv", detail::read_file(enriched_csv));
    }
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateFlags {
    CommonFlags common;
    std::string kind;
    std::string estimate_path;
    std::string draws_path;
    std::string method = "mle";
    std::string param = "N_u";
    double tau = 1.0;
    bool tau_given = false;
};

// Fold rows usable for fitting: positive back-estimate and a finite spread.
struct FitTable {
    std::vector<double> log_true, log_back, se_log;
};

FitTable loo_fit_table(const ArdSurvey& s, const std::string& method) {
    FitTable t;
    for (const LooRow& row : loo_backestimates(s, method)) {
        if (!(row.backestimate > 0.0) || !std::isfinite(row.se_log)) continue;
        t.log_true.push_back(std::log(static_cast<double>(row.known_size)));
        t.log_back.push_back(std::log(row.backestimate));
        t.se_log.push_back(row.se_log);
    }
    return t;
}

int cmd_calibrate(const CalibrateFlags& f, const std::string& command) {
    Json config = Json::object();
    config["subcommand"] = "calibrate";
    config["calibration"] = f.kind;
    config["method"] = f.method;
    config["param"] = f.param;
    config["tau"] = f.tau;
    config["seed"] = f.common.seed;
    config_input(config, "estimate", f.estimate_path);
    config_input(config, "draws", f.draws_path);
    config_input(config, "survey", f.common.survey_path);
    config_input(config, "sizes", f.common.sizes_path);

    OutputSink sink(f.common.out_dir, command, config, f.common.seed);

    if (f.kind == "visibility") {
        if (f.estimate_path.empty())
            throw DataError("visibility calibration adjusts an estimate; pass --estimate");
        if (!f.tau_given) throw UsageError("visibility calibration needs --tau");
        SizeEstimate est = estimate_from_json(detail::parse_json_file(f.estimate_path));
        est = scale_by_visibility(est, {f.tau, "cli"});
        const Json out = estimate_to_json(est);
        emit(out);
        sink.write("estimate.json", out.dump(2) + "\n");
    } else if (f.kind == "curve") {
        if (f.estimate_path.empty())
            throw DataError("curve calibration adjusts an estimate; pass --estimate");
        if (f.common.survey_path.empty() || f.common.sizes_path.empty())
            throw DataError("curve calibration fits on the survey's known columns; pass "
                            "--survey and --sizes");
        SizeEstimate est = estimate_from_json(detail::parse_json_file(f.estimate_path));
        const ArdSurvey s = load_survey(f.common.survey_path, f.common.sizes_path);
        const double N = static_cast<double>(s.population_total);
        FitTable t = loo_fit_table(s, f.method);
        std::vector<double> beta_true, beta_recalled;
        for (std::size_t i = 0; i < t.log_true.size(); ++i) {
            beta_true.push_back(t.log_true[i] - std::log(N));
            beta_recalled.push_back(t.log_back[i] - std::log(N));
        }
        const CalibrationCurve curve =
            fit_calibration_curve(beta_true, beta_recalled, "loo:" + f.method);
        std::cerr << "fitted recall curve: a " << curve.a << ", anchor " << curve.b << "\n";
        est = apply_curve_to_estimate(est, curve, s.population_total);
        const Json out = estimate_to_json(est);
        emit(out);
        sink.write("estimate.json", out.dump(2) + "\n");
    } else if (f.kind == "eiv") {
        if (f.draws_path.empty())
            throw DataError("the errors-in-variables correction rewrites posterior draws; "
                            "pass --draws");
        if (f.common.survey_path.empty() || f.common.sizes_path.empty())
            throw DataError("the errors-in-variables correction fits on the survey's known "
                            "columns; pass --survey and --sizes");
        const PosteriorDraws draws = draws_from_csv(detail::read_file(f.draws_path));
        const ArdSurvey s = load_survey(f.common.survey_path, f.common.sizes_path);
        const FitTable t = loo_fit_table(s, f.method);
        const EivFit fit = fit_eiv(t.log_true, t.log_back, t.se_log);
        std::cerr << "recall regression: intercept " << fit.a << ", slope " << fit.b
                  << ", extra sd " << fit.sigma_eps << "\n";
        const PosteriorDraws adjusted = eiv_adjust_size_draws(draws, fit, f.common.seed, f.param);
        SizeEstimate est = posterior_size(adjusted, "eiv-adjusted", f.param);
        est.calibrations_applied.push_back("eiv_recall");
        const Json out = estimate_to_json(est);
        emit(out);
        sink.write("estimate.json", out.dump(2) + "\n");
        sink.write("draws.csv", draws_to_csv(adjusted));
    } else {
        throw UsageError("unknown calibration '" + f.kind +
                         "'; expected visibility, curve, or eiv");
    }
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseFlags {
    CommonFlags common;
    std::string method = "mle";
    std::string draws_path;
    double tolerance = 1.25;
    std::size_t max_removals = std::numeric_limits<std::size_t>::max();
    double rhat_threshold = 1.1;
};

int cmd_diagnose_loo(const DiagnoseFlags& f, const std::string& command) {
    Json config = Json::object();
    config["subcommand"] = "diagnose loo";
    config["method"] = f.method;
    config_input(config, "survey", f.common.survey_path);
    config_input(config, "sizes", f.common.sizes_path);

    const ArdSurvey s = load_survey(f.common.survey_path, f.common.sizes_path);
    const std::string csv = loo_to_csv(loo_backestimates(s, f.method));
    std::cout << csv;

    OutputSink sink(f.common.out_dir, command, config, 0);
    sink.write("loo.csv", csv);
    sink.finish();
    return 0;
}

int cmd_diagnose_trim(const DiagnoseFlags& f, const std::string& command) {
    Json config = Json::object();
    config["subcommand"] = "diagnose trim";
    config["method"] = f.method;
    config["tolerance"] = f.tolerance;
    config_input(config, "survey", f.common.survey_path);
    config_input(config, "sizes", f.common.sizes_path);

    const ArdSurvey s = load_survey(f.common.survey_path, f.common.sizes_path);
    TrimConfig cfg;
    cfg.ratio_tolerance = f.tolerance;
    cfg.max_removals = f.max_removals;
    const TrimResult trimmed = trim_stepwise(s, f.method, cfg);
    const Json log = trim_log_to_json(trimmed);
    emit(log);
    for (const auto& round : trimmed.rounds)
        std::cerr << "removed '" << round.removed_column << "' (log ratio "
                  << round.log_ratio << ")\n";

    OutputSink sink(f.common.out_dir, command, config, 0);
    sink.write("trim.json", log.dump(2) + "\n");
    if (!f.common.out_dir.empty()) {
        const std::string survey_csv = (fs::path(f.common.out_dir) / "trimmed_survey.csv").string();
        const std::string sizes_json = (fs::path(f.common.out_dir) / "trimmed_sizes.json").string();
        save_survey(trimmed.survey, survey_csv, sizes_json);
        sink.write("trimmed_survey.csv", detail::read_file(survey_csv));
        sink.write("trimmed_sizes.json", detail::read_file(sizes_json));
    }
    sink.finish();
    return 0;
}

int cmd_diagnose_chains(const DiagnoseFlags& f, const std::string& command) {
    Json config = Json::object();
    config["subcommand"] = "diagnose chains";
    config["rhat_threshold"] = f.rhat_threshold;
    config_input(config, "draws", f.draws_path);

    if (f.draws_path.empty()) throw UsageError("diagnose chains needs --draws");
    const PosteriorDraws draws = draws_from_csv(detail::read_file(f.draws_path));
    const ChainDiagnostics diag = diagnostics(draws, f.rhat_threshold);
    for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";

    std::string csv;
    if (draws.n_chains() < 2) {
        // A lone chain cannot support a between-chain ratio; leave the
        // column empty rather than print a number that looks meaningful.
        std::ostringstream out;
        out << "param,rhat,ess\n";
        for (const auto& p : diag.params)
            out << p.name << ",," << detail::format_double(p.ess) << "\n";
        csv = out.str();
    } else {
        csv = diagnostics_to_csv(diag);
    }
    std::cout << csv;

    OutputSink sink(f.common.out_dir, command, config, 0);
    sink.write("diagnostics.csv", csv);
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkFlags {
    std::vector<std::string> scenario_paths;
    std::vector<std::string> estimators = {"pimle", "mle", "mos"};
    std::size_t replicates = 100;
    std::uint64_t seed = 20250801;
    unsigned threads = 0;
    std::string out_dir;
};

int cmd_benchmark(const BenchmarkFlags& f, const std::string& command) {
    Json config = Json::object();
    config["subcommand"] = "benchmark";
    config["estimators"] = f.estimators;
    config["replicates"] = f.replicates;
    config["seed"] = f.seed;
    Json scen = Json::array();
    std::vector<Scenario> scenarios;
    for (const auto& path : f.scenario_paths) {
        scenarios.push_back(load_scenario(path));
        Json j = Json::object();
        j["path"] = path;
        j["digest"] = content_digest(detail::read_file(path));
        scen.push_back(std::move(j));
    }
    config["scenarios"] = std::move(scen);

    BenchmarkConfig cfg;
    cfg.replicates = f.replicates;
    cfg.seed = f.seed;
    cfg.threads = f.threads;
    const BenchmarkResult res = run_benchmark(scenarios, f.estimators, cfg);

    emit(benchmark_summaries_to_json(res));
    std::size_t failures = 0;
    for (const auto& s : res.summaries) failures += s.failures;
    if (failures > 0) std::cerr << failures << " estimator runs failed; see the cells table\n";

    OutputSink sink(f.out_dir, command, config, f.seed);
    sink.write("benchmark.csv", benchmark_to_csv(res));
    sink.write("summaries.json", benchmark_summaries_to_json(res).dump(2) + "\n");
    sink.finish();
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"network scale-up estimation toolkit"};
    app.require_subcommand(0, 1);
    const std::string command = join_command(argc, argv);

    EstimateFlags ef;
    CLI::App* est = app.add_subcommand("estimate", "estimate a hidden population size");
    est->add_option("--survey", ef.common.survey_path, "survey CSV")->required();
    est->add_option("--sizes", ef.common.sizes_path, "known sizes JSON")->required();
    est->add_option("--method", ef.method, "estimator label")->required();
    est->add_option("--unknown", ef.common.unknown_name, "unknown column to estimate");
    est->add_option("--enriched", ef.enriched_path, "enriched reports CSV (gnsum)");
    est->add_option("--tau-prior", ef.tau_prior, "eta,nu prior on transmission");
    est->add_option("--rare", ef.rare, "rare column for renormalisation (repeatable)");
    est->add_option("--seed", ef.common.seed, "RNG seed");
    est->add_option("--threads", ef.common.threads, "worker threads (0: all)");
    est->add_option("--out-dir", ef.common.out_dir, "directory for files + manifest");
    add_mcmc_flags(est, ef.mcmc);

    SimulateFlags sf;
    CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic ARD survey");
    sim->add_option("--scenario", sf.scenario_path, "scenario JSON")->required();
    CLI::Option* sim_seed = sim->add_option("--seed", sf.seed, "override the scenario seed");
    sim->add_option("--out-dir", sf.out_dir, "output directory")->required();

    CalibrateFlags cf;
    CLI::App* cal = app.add_subcommand("calibrate", "bias corrections for estimates or draws");
    cal->add_option("--calibration", cf.kind, "visibility | curve | eiv")->required();
    cal->add_option("--estimate", cf.estimate_path, "estimate JSON to adjust");
    cal->add_option("--draws", cf.draws_path, "draws CSV to adjust (eiv)");
    CLI::Option* cal_tau = cal->add_option("--tau", cf.tau, "visibility factor in (0,1]");
    cal->add_option("--survey", cf.common.survey_path, "survey CSV (curve/eiv fitting)");
    cal->add_option("--sizes", cf.common.sizes_path, "known sizes JSON (curve/eiv fitting)");
    cal->add_option("--method", cf.method, "back-estimation method for fitting");
    cal->add_option("--param", cf.param, "draw parameter to adjust");
    cal->add_option("--seed", cf.common.seed, "RNG seed for the eiv noise");
    cal->add_option("--out-dir", cf.common.out_dir, "directory for files + manifest");

    DiagnoseFlags df;
    CLI::App* dia = app.add_subcommand("diagnose", "internal-consistency checks");
    dia->require_subcommand(1);
    CLI::App* dloo = dia->add_subcommand("loo", "leave-one-out back-estimation table");
    CLI::App* dtrim = dia->add_subcommand("trim", "stepwise removal of inconsistent columns");
    CLI::App* dchains = dia->add_subcommand("chains", "split R-hat and effective sample sizes");
    for (CLI::App* sub : {dloo, dtrim}) {
        sub->add_option("--survey", df.common.survey_path, "survey CSV")->required();
        sub->add_option("--sizes", df.common.sizes_path, "known sizes JSON")->required();
        sub->add_option("--method", df.method, "back-estimation method");
        sub->add_option("--out-dir", df.common.out_dir, "directory for files + manifest");
    }
    dtrim->add_option("--tolerance", df.tolerance, "acceptable back-estimate ratio (> 1)");
    dtrim->add_option("--max-removals", df.max_removals, "cap on removed columns");
    dchains->add_option("--draws", df.draws_path, "draws CSV")->required();
    dchains->add_option("--rhat-threshold", df.rhat_threshold, "warn above this split R-hat");
    dchains->add_option("--out-dir", df.common.out_dir, "directory for files + manifest");

    BenchmarkFlags bf;
    CLI::App* ben = app.add_subcommand("benchmark", "replicate estimators over scenarios");
    ben->add_option("--scenario", bf.scenario_paths, "scenario JSON (repeatable)")->required();
    ben->add_option("--estimators", bf.estimators, "estimator labels")->delimiter(',');
    ben->add_option("--replicates", bf.replicates, "replicates per scenario");
    ben->add_option("--seed", bf.seed, "master seed");
    ben->add_option("--threads", bf.threads, "worker threads (0: all)");
    ben->add_option("--out-dir", bf.out_dir, "directory for files + manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (est->parsed()) return cmd_estimate(ef, command);
        if (sim->parsed()) {
            sf.seed_given = sim_seed->count() > 0;
            return cmd_simulate(sf, command);
        }
        if (cal->parsed()) {
            cf.tau_given = cal_tau->count() > 0;
            return cmd_calibrate(cf, command);
        }
        if (dia->parsed()) {
            if (dloo->parsed()) return cmd_diagnose_loo(df, command);
            if (dtrim->parsed()) return cmd_diagnose_trim(df, command);
            if (dchains->parsed()) return cmd_diagnose_chains(df, command);
        }
        if (ben->parsed()) return cmd_benchmark(bf, command);
        std::cerr << app.help() << std::flush;
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
