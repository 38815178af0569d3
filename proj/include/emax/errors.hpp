#pragma once

#include <stdexcept>
#include <string>

namespace emax {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation at the vertical asymptote x = -theta2 (or at the tilde
// equivalent).  Downstream solvers rely on a hard error here instead of
// NaN propagation.
struct SingularityError : Error {
    using Error::Error;
};

// Arguments outside the mathematical domain of an operation
// (e.g. theta2 <= -a for the D-optimal dose, alpha outside the
// attainable power range).
struct DomainError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (bad CSV, wrong number of dose
// groups, non-positive counts, ...).
struct ValidationError : Error {
    using Error::Error;
};

// An operation was invoked on a shape class it is not defined for
// (e.g. the closed-form MLE on non increasing-concave data).
struct ShapeError : Error {
    using Error::Error;
};

}  // namespace emax
