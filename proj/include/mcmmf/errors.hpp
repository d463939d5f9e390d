#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcmmf {

// Domain error taxonomy. Argument violations use std::invalid_argument.

struct layout_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct calibration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct lookup_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct undefined_correlation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File/container parse failure. byte_offset is the position at which the
// stream stopped making sense.
struct format_error : std::runtime_error {
    std::size_t byte_offset;

    format_error(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
};

} // namespace mcmmf
