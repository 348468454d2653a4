#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace maeq {

/// Evaluation outside a model's domain (e.g. beta model with x >= s).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Too few distinct dose levels to identify a family's parameters.
class InsufficientDesign : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid combination of settings (scenario/arm, thresholds, grids).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A candidate fit did not converge where convergence was required.
class FitFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bootstrap could not produce a usable sample.
class BootstrapFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input row. `row()` is 1-based and counts the header line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t row, const std::string& what)
        : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace maeq
