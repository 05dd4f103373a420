#pragma once

#include <stdexcept>
#include <string>

namespace tomolab {

// Invalid input or configuration. The CLI maps this to exit code 1.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A caller broke a precondition on a value (e.g. a non-Hermitian matrix).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Numerical failure: overflow guards, non-convergence, unphysical results.
// The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tomolab
