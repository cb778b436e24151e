#pragma once

#include <stdexcept>
#include <string>

namespace expfam {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A point lies outside the support it was declared on.
struct DomainViolationError : Error {
    using Error::Error;
};

/// A (family, domain, constraint) combination with no proven bound or
/// implementation. Callers may override the offending quantity manually.
struct UnsupportedConfigError : Error {
    using Error::Error;
};

/// A size guard tripped (grid resolution, Hessian dimension, ...).
struct CapacityError : Error {
    using Error::Error;
};

/// A self-validating numerical routine missed its accuracy target.
struct AccuracyError : Error {
    using Error::Error;
};

/// Non-finite values or failed factorizations at run time.
struct NumericalError : Error {
    using Error::Error;
};

/// Malformed configuration input.
struct SchemaError : Error {
    using Error::Error;
};

/// Invariant breakage inside the library; indicates a bug.
struct InternalError : Error {
    using Error::Error;
};

}  // namespace expfam
