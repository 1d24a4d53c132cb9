#pragma once

#include <stdexcept>
#include <string>

namespace icsad {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   ConfigError -> 1, DataError -> 2, TrainError/other runtime -> 3.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension violations in tensor operations. Messages name the
// offending axis.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    TrainError(const std::string& msg, long where = -1)
        : std::runtime_error(msg), index(where) {}
    // epoch or layer index, depending on context; -1 if not applicable
    long index;
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icsad
