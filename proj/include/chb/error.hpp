#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chb {

// Exit-code contract of the CLI: 2 config/validator, 3 invariant, 4 numeric.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    SolverError(const std::string& what, double residual, int iters)
        : std::runtime_error(what), residual(residual), iters(iters) {}
    double residual = 0.0;
    int iters = 0;
};

// A time step that failed recoverably (caller may halve dt and retry).
struct StepError : std::runtime_error {
    explicit StepError(const std::string& what, std::vector<double> residual_history = {})
        : std::runtime_error(what), residual_history(std::move(residual_history)) {}
    std::vector<double> residual_history;
};

} // namespace chb
