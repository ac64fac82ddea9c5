#pragma once

#include <stdexcept>

namespace tensemb {

// Error categories; the CLI maps them to exit codes:
// usage_error -> 1, data_error -> 2, numeric_error -> 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad flags, bad configuration, API preconditions violated.
struct usage_error : error {
    using error::error;
};

// Malformed or missing input data, out-of-vocabulary lookups.
struct data_error : error {
    using error::error;
};

// Non-finite values, degenerate vectors, exhausted sampling.
struct numeric_error : error {
    using error::error;
};

}  // namespace tensemb
