#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaleup/classic.hpp"
#include "scaleup/errors.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/simulate.hpp"

// Monte-Carlo comparison of estimators across simulated scenarios.  Each
// replicate regenerates the world from a seed mixed out of the master seed,
// the scenario name, and the replicate index, then hands the same dataset to
// every estimator, so the comparison is paired and byte-reproducible at any
// thread count.

namespace scaleup {

struct BenchmarkCell {
    std::string scenario;
    std::string estimator;
    std::size_t replicate = 0;
    double truth = 0.0;
    double point = std::numeric_limits<double>::quiet_NaN();
    double rel_error = std::numeric_limits<double>::quiet_NaN();  // (point - truth) / truth
    std::optional<bool> covered;  // set only when the estimator reports an interval
    std::string error;            // nonempty when the estimator failed on this dataset
};

struct BenchmarkSummary {
    std::string scenario;
    std::string estimator;
    std::size_t replicates = 0;
    std::size_t failures = 0;
    double median_rel_error = std::numeric_limits<double>::quiet_NaN();
    double median_abs_rel_error = std::numeric_limits<double>::quiet_NaN();
    double sd_point = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> coverage;  // fraction of reported intervals containing the truth
};

struct BenchmarkResult {
    std::vector<BenchmarkCell> cells;        // scenario-major, replicate, then estimator
    std::vector<BenchmarkSummary> summaries;
};

struct BenchmarkConfig {
    std::size_t replicates = 100;
    std::uint64_t seed = 20250801;
    unsigned threads = 0;  // 0: all hardware threads
};

inline const std::vector<std::string>& benchmark_estimator_labels() {
    static const std::vector<std::string> labels = {"pimle", "mle",  "mos",    "wmle",
                                                    "wmos",  "johnsen", "gnsum"};
    return labels;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline SizeEstimate run_benchmark_estimator(const std::string& label, const GeneratedArd& data,
                                            std::size_t ucol) {
    if (label == "johnsen") return johnsen_estimate(data.survey, ucol);
    if (label == "gnsum") {
        if (!data.enriched)
            throw ModelError("gnsum: the scenario generates no enriched reports");
        return gnsum(data.survey, ucol, *data.enriched).first;
    }
    return classic_estimator(label)(data.survey, ucol);
}

// Index of the first unknown column and its true size.
inline std::pair<std::size_t, double> benchmark_target(const Scenario& sc) {
    for (std::size_t j = 0; j < sc.world.subpops.size(); ++j)
        if (!sc.world.subpops[j].known)
            return {j, static_cast<double>(sc.world.subpops[j].size)};
    throw DataError("scenario '" + sc.name + "' has no unknown subpopulation to estimate");
}

} // namespace detail

inline BenchmarkResult run_benchmark(const std::vector<Scenario>& scenarios,
                                     const std::vector<std::string>& estimators,
                                     const BenchmarkConfig& cfg = {}) {
    if (estimators.empty()) throw UsageError("benchmark needs at least one estimator label");
    for (const std::string& label : estimators) {
        const auto& known = benchmark_estimator_labels();
        if (std::find(known.begin(), known.end(), label) == known.end())
            throw UsageError("unknown benchmark estimator '" + label + "'");
    }
    std::vector<std::pair<std::size_t, double>> targets;  // may throw; resolve serially
    for (const Scenario& sc : scenarios) {
        validate_world(sc.world);
        targets.push_back(detail::benchmark_target(sc));
    }

    BenchmarkResult res;
    if (scenarios.empty() || cfg.replicates == 0) return res;

    const std::size_t E = estimators.size();
    const std::size_t R = cfg.replicates;
    res.cells.resize(scenarios.size() * R * E);

    parallel_for(scenarios.size() * R, cfg.threads, [&](std::size_t job) {
        const std::size_t si = job / R;
        const std::size_t rep = job % R;
        const Scenario& sc = scenarios[si];
        const auto [ucol, truth] = targets[si];

        WorldConfig wc = sc.world;
        wc.seed = mix_seed(cfg.seed, "benchmark:" + sc.name, rep);
        const GeneratedArd data = generate_ard(generate_world(wc), sc.bias);

        for (std::size_t e = 0; e < E; ++e) {
            BenchmarkCell& cell = res.cells[(si * R + rep) * E + e];
            cell.scenario = sc.name;
            cell.estimator = estimators[e];
            cell.replicate = rep;
            cell.truth = truth;
            try {
                const SizeEstimate est = detail::run_benchmark_estimator(estimators[e], data, ucol);
                cell.point = est.point;
                cell.rel_error = (est.point - truth) / truth;
                if (est.interval)
                    cell.covered = est.interval->first <= truth && truth <= est.interval->second;
            } catch (const std::exception& e2) {
                cell.error = e2.what();
            }
        }
    });

    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        for (std::size_t e = 0; e < E; ++e) {
            BenchmarkSummary sum;
            sum.scenario = scenarios[si].name;
            sum.estimator = estimators[e];
            sum.replicates = R;
            std::vector<double> rel, pts;
            std::size_t cov_n = 0, cov_hit = 0;
            for (std::size_t rep = 0; rep < R; ++rep) {
                const BenchmarkCell& cell = res.cells[(si * R + rep) * E + e];
                if (!cell.error.empty()) { ++sum.failures; continue; }
                rel.push_back(cell.rel_error);
                pts.push_back(cell.point);
                if (cell.covered) { ++cov_n; cov_hit += *cell.covered ? 1 : 0; }
            }
            sum.median_rel_error = detail::median_of(rel);
            std::vector<double> abs_rel(rel.size());
            std::transform(rel.begin(), rel.end(), abs_rel.begin(),
                           [](double v) { return std::abs(v); });
            sum.median_abs_rel_error = detail::median_of(abs_rel);
            if (pts.size() >= 2) {
                double mean = 0.0;
                for (double p : pts) mean += p;
                mean /= static_cast<double>(pts.size());
                double ss = 0.0;
                for (double p : pts) ss += (p - mean) * (p - mean);
                sum.sd_point = std::sqrt(ss / (static_cast<double>(pts.size()) - 1.0));
            }
            if (cov_n > 0)
                sum.coverage = static_cast<double>(cov_hit) / static_cast<double>(cov_n);
            res.summaries.push_back(std::move(sum));
        }
    }
    return res;
}

} // namespace scaleup
