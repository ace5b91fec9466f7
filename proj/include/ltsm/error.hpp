#pragma once

#include <stdexcept>
#include <string>

namespace ltsm {

/// Out-of-range or otherwise invalid input parameter.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Quadrature, factorization or estimator failure. The message carries diagnostics.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; the message names the failing field.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace ltsm
