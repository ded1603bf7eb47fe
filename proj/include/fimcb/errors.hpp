#pragma once

#include <stdexcept>
#include <string>

namespace fimcb {

/// Bad user input: invalid configuration values, malformed files,
/// violated data contracts. Maps to exit code 2 at the CLI boundary.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem or device failure. Maps to exit code 3 at the CLI boundary.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fimcb
