#pragma once

#include <stdexcept>
#include <string>

namespace banditaudit {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input: bad feature encodings, CSV/config
// violations, out-of-range parameters.  Maps to CLI exit code 1.
struct data_error : error {
    explicit data_error(const std::string& what) : error(what) {}
};

// Numerical failure during an otherwise valid computation: singular
// covariance, degenerate forecast variance.  Maps to CLI exit code 2.
struct numeric_error : error {
    explicit numeric_error(const std::string& what) : error(what) {}
};

// A model-level precondition failed: no usable observations to fit,
// no usable resamples for a user.  Maps to CLI exit code 2.
struct model_error : error {
    explicit model_error(const std::string& what) : error(what) {}
};

}  // namespace banditaudit
