#pragma once

#include <stdexcept>
#include <string>

namespace heisen {

enum class ErrorCode {
    InvalidArgument = 1,
    DimensionMismatch = 2,
    Domain = 3,
    Numerical = 4,
    Io = 5,
    Config = 6,
    Internal = 7,
};

/// Exception carrying a stable error code; the C API maps it onto heisen_status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) {
        throw Error(code, what);
    }
}

} // namespace heisen
