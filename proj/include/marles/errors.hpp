#pragma once

#include <stdexcept>
#include <string>

namespace marles {

/// File/serialization failure; the CLI maps this to its own exit code.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace marles
