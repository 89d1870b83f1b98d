#pragma once

#include <stdexcept>
#include <string>

namespace triagenet {

// Error taxonomy mirrored by the CLI exit codes: config/usage -> 1,
// data/input -> 2, training or inference -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace triagenet
