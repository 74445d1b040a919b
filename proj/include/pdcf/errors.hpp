#pragma once

#include <stdexcept>
#include <string>

namespace pdcf {

/// Thrown when tensor shapes violate an operation's contract.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown on unreadable, malformed, or mismatched input data (files, datasets,
/// checkpoints). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when training produces a non-finite loss or gradient. Maps to CLI
/// exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pdcf
