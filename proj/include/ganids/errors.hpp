#pragma once

#include <stdexcept>
#include <string>

namespace ganids {

// Error categories used across the library. All derive from std::runtime_error
// so callers can catch broadly or by category.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreements (matmul inner dims, elementwise mismatch, ...).
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Violated call contracts (non-scalar loss, empty batch, bad argument range).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Inconsistent configuration (layer widths, unknown keys, bad variants).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf detected in tensor data.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Malformed input data (CSV parse failures carry the row index).
struct IngestError : Error {
    explicit IngestError(const std::string& msg) : Error(msg) {}
};

// Mix-plan violations (synthetic rows requested for a held-out class, ...).
struct PlanError : Error {
    explicit PlanError(const std::string& msg) : Error(msg) {}
};

// Leave-one-attack-out protocol violations (held-out rows in a training
// artifact, held-out class absent from the test set).
struct ProtocolError : Error {
    explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

// Filesystem and serialization failures.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace ganids
