#ifndef TGAN_COMMON_HPP
#define TGAN_COMMON_HPP

#include <stdexcept>
#include <string>

namespace tgan {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError -> 3, TrainingError -> 4.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error("training error: " + msg) {}
};

} // namespace tgan

#endif
