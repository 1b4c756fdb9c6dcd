#pragma once

#include <stdexcept>
#include <string>

namespace fslab {

/// Malformed or schema-violating configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing, unreadable or invalid input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Checkpoint incompatible with the current charset, config or model kind.
struct CheckpointMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fslab
