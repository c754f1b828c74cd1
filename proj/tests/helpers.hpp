#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "scaleup/rng.hpp"
#include "scaleup/survey.hpp"

// Shared fixtures for the test suite.

namespace testutil {

// Two-respondent survey with hand-checkable estimates:
//   degrees 100 / 200 under both degree rules; ratio-of-sums point 30
//   with standard error 10; mean-of-ratios point 30; weighted variants
//   40 (ratio) and 45 (mean) with weights 2 and 1.
inline scaleup::ArdSurvey canonical_survey() {
    scaleup::ArdSurvey s;
    s.population_total = 1000;
    s.column_names = {"alpha", "beta", "hidden"};
    s.known_size = {100, 100, scaleup::unknown_size};
    s.responses = {{10, 10, 3}, {20, 20, 6}};
    s.respondent_ids = {"r1", "r2"};
    s.weights = {2.0, 1.0};
    return s;
}

// Complete random survey (no missing cells) for property tests.
inline scaleup::ArdSurvey random_survey(scaleup::Rng& rng, std::size_t n, std::size_t n_known,
                                        long long population = 100000) {
    scaleup::ArdSurvey s;
    s.population_total = population;
    for (std::size_t j = 0; j < n_known; ++j) {
        s.column_names.push_back("k" + std::to_string(j));
        s.known_size.push_back(500 + 250 * static_cast<long long>(j) +
                               scaleup::runif_int(rng, 0, 400));
    }
    s.column_names.push_back("hidden");
    s.known_size.push_back(scaleup::unknown_size);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> row;
        for (std::size_t j = 0; j <= n_known; ++j)
            row.push_back(scaleup::runif_int(rng, 0, 12));
        // Keep at least one positive known cell so every degree is defined.
        if (row[0] == 0) row[0] = 1;
        s.responses.push_back(std::move(row));
    }
    return s;
}

inline std::string make_temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    std::string tmpl = (fs::temp_directory_path() / ("scaleup_" + tag + "_XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    return std::string(buf.data());
}

} // namespace testutil
