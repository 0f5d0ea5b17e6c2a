#pragma once

#include <stdexcept>
#include <string>

namespace fedmap {

// Shape/contract violations: mismatched tensors, bad payload lengths, K > d, ...
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values produced during numeric work.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration files or values; carries key/line context in the message.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures, with the offending path in the message.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fedmap
