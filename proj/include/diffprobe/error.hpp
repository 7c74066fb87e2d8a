#pragma once

#include <stdexcept>
#include <string>

namespace diffprobe {

/// Raised for invalid data, malformed files and violated preconditions.
class Error : public std::runtime_error {
   public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or truncated on-disk input.
class FormatError : public Error {
   public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

}  // namespace diffprobe
