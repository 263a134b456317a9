#pragma once

#include <stdexcept>
#include <string>

namespace sibe {

// Shape/dimension mismatches between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Domain violations: nonpositive sigma, tau outside (0,1], negative lambda, ...
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf detected at an op boundary.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad run/env configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace sibe
