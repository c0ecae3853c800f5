#pragma once

#include <stdexcept>
#include <string>

namespace notefuse {

// Error taxonomy used across the library. All derive from std::runtime_error
// so callers can catch coarsely; the CLI maps each to a stage-tagged message.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct state_error : std::runtime_error {
    explicit state_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct mapping_error : std::runtime_error {
    explicit mapping_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace notefuse
