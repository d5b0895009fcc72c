#pragma once

#include <stdexcept>
#include <string>

namespace eeo {

// Error taxonomy used across the library. All carry a human-readable message
// naming the offending quantity (shapes, indices, line numbers, residuals).

// Dimension / shape mismatches between operands.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where a finite value is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Precondition or parameter-range violation (degenerate input, bad config value).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative method exhausted its budget without meeting its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config-file parse or semantic error; messages carry 1-based line numbers.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / serialization failures (missing file, corrupt checkpoint, ...).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace eeo
