#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace frisson {

enum class ErrorCode {
    invalid_parameter,
    invalid_input,
    shape_mismatch,
    protocol_violation,
    parse_error,
    encode_error,
    format_error,
    insufficient_data,
    not_found,
    ts_regression,
    io_error,
};

/// Wire name of an error code, as carried in `err` frames.
std::string_view to_string(ErrorCode code) noexcept;

/// The single exception type thrown by the library. `line()` is nonzero when
/// the failure is tied to a line of an input file or stream.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), code_(code), line_(line) {}

    ErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    ErrorCode code_;
    std::size_t line_;
};

}  // namespace frisson
