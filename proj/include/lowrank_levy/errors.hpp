#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lowrank_levy {

/// Invalid model, clock or configuration parameters.
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// The requested combination has no closed-form characteristic function or
/// Laplace transform.
struct NoClosedForm : std::domain_error {
    using std::domain_error::domain_error;
};

/// The value to invert is too close to zero. Callers mask the frequency.
struct InversionGuard : std::domain_error {
    using std::domain_error::domain_error;
};

/// Argument outside the disk on which a truncated series is evaluated.
struct OutOfDomain : std::domain_error {
    using std::domain_error::domain_error;
};

/// Every frequency was masked, nothing is left to fit.
struct EmptySpectralInformation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
    SolverFailure(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), objective_trace(std::move(trace)) {}
    std::vector<double> objective_trace;
};

}  // namespace lowrank_levy
