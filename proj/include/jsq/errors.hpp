#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jsq {

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A vector outside the background space, or a face with an empty set of
// shortest queues.
struct InvalidState : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SizeLimitExceeded : std::length_error {
    using std::length_error::length_error;
};

// ρ ≥ 1 where a stable system is required.
struct UnstableSystem : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConvergenceFailure : std::runtime_error {
    ConvergenceFailure(const std::string& what, double residual, std::size_t iterations)
        : std::runtime_error(what), residual(residual), iterations(iterations) {}
    double residual;
    std::size_t iterations;
};

// An identity that must hold by construction did not; signals a bug in a
// builder rather than bad input.
struct InternalConsistency : std::logic_error {
    using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No admissible Lyapunov constants in the scanned region.
struct CertificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace jsq
