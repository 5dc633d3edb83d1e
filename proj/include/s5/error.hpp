#pragma once

#include <stdexcept>
#include <string>

namespace s5 {

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError -> 2, DataError/FormatError -> 3, NumericalError -> 4.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Misuse of an API contract (e.g. backward() called twice on one tape).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt or mismatched binary file (dataset, checkpoint).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace s5
