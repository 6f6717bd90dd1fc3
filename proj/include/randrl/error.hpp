#pragma once

#include <stdexcept>
#include <string>

namespace randrl {

// Invalid shapes, out-of-range hyperparameters, malformed files.
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Autodiff misuse: mixing variables from different tapes.
struct GraphError : std::runtime_error {
    explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

// Autodiff misuse: calling backward twice on the same tape.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failures: unreadable checkpoint, unwritable output directory.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (NaN/inf loss); the CLI maps this to its own exit code.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace randrl
