#pragma once

#include <stdexcept>
#include <string>

namespace stegograph {

// Contract violations (bad shapes, bad config values, plan not fitting image).
struct InvalidArgument : std::invalid_argument {
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

// File and format problems (missing files, malformed PGM/manifest/checkpoint).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical error states: NaN/Inf after a forward op, unbracketable searches.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace stegograph
