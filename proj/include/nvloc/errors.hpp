#pragma once

#include <stdexcept>
#include <string>

namespace nvloc {

/// Precondition or domain violation (bad axis norm, angle out of range, ...).
/// The CLI maps this to exit code 2.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (singular geometry, negative radicand, ill-conditioned
/// azimuth, unidentifiable fit). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nvloc
