#pragma once

#include <stdexcept>
#include <string>

namespace heco {

// Error taxonomy mapped to CLI exit codes: ConfigError -> 1, DataError -> 2,
// everything else (numeric/tensor/usage) -> 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Malformed datasets, schema violations, bad ids, structural problems.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

// Shape mismatches and other tensor-level misuse.
struct TensorError : std::runtime_error {
    explicit TensorError(const std::string& msg) : std::runtime_error("tensor error: " + msg) {}
};

// Non-finite losses, divergence.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// API misuse: backward on non-scalar, optimizer step before backward.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error("usage error: " + msg) {}
};

}  // namespace heco
