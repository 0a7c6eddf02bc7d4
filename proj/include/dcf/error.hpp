/**
 * @file error.hpp
 * @brief Error type shared by every dcf module.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace dcf {

enum class ErrorCode {
    InvalidArgument,
    EmptyRegion,
    ContourCollapsed,
    DegenerateContour,
    BadMagic,
    BadVersion,
    Truncated,
    MissingTensor,
    ShapeMismatch,
    InsufficientTissue,
    Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dcf
