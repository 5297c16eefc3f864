#pragma once

#include <stdexcept>
#include <string>

namespace surge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (track CSV, mesh files). Carries a line number when known.
struct ParseError : Error {
    using Error::Error;
};

// Input violates a documented precondition or invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Bad configuration values (resolution not a power of two, invalid fractions, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Tensor shape mismatch in the autograd / model layer.
struct ShapeError : Error {
    using Error::Error;
};

// Binary file format violations (bad magic, truncation, shape table mismatch).
struct FormatError : Error {
    using Error::Error;
};

// Metric requested on an empty domain (empty mask, no records).
struct MetricError : Error {
    using Error::Error;
};

// Numerical failure during training (NaN loss).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace surge
