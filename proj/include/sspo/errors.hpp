#pragma once

#include <stdexcept>
#include <string>

namespace sspo {

/// Malformed arguments: out-of-range tokens, empty lists, bad batches.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration rejected by schema or constraint checks (CLI exit code 1).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A non-finite intermediate or a diverged parameter (CLI exit code 2).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sspo
