#pragma once

#include <stdexcept>
#include <string>

namespace scaleup {

// Input data violates a structural requirement (bad file, impossible count,
// sizes that do not match the survey, ...).  Maps to exit code 1 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A model or estimator cannot proceed on otherwise well-formed data
// (all-zero degrees, non-monotone size ordering, missing prior, ...).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// The caller asked for something the interface does not offer
// (unknown method name, malformed flag value).  Maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace scaleup
