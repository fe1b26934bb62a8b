#pragma once

#include <stdexcept>
#include <string>

namespace scfm {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration, CLI misuse, or a missing prerequisite artifact. Exit code 2.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Tensor or checkpoint shape inconsistency.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite loss or state. Training never continues past one of these. Exit code 3.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// Malformed checkpoint file (magic/version/truncation).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

}  // namespace scfm
