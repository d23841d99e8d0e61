#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmgeo {

enum class ErrorCode {
    invalid_input,
    numerical_failure,
    bad_magic,
    unsupported_version,
    truncated_payload,
    nan_in_valid,
    io_failure,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_input: return "invalid_input";
        case ErrorCode::numerical_failure: return "numerical_failure";
        case ErrorCode::bad_magic: return "bad_magic";
        case ErrorCode::unsupported_version: return "unsupported_version";
        case ErrorCode::truncated_payload: return "truncated_payload";
        case ErrorCode::nan_in_valid: return "nan_in_valid";
        case ErrorCode::io_failure: return "io_failure";
    }
    return "unknown";
}

/// Process exit status for a failure of the given kind: 3 for numerical
/// failures (singular systems, non-convergence), 2 for everything else.
constexpr int exit_status(ErrorCode code) noexcept {
    return code == ErrorCode::numerical_failure ? 3 : 2;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorCode::invalid_input, what);
}

}  // namespace pmgeo
