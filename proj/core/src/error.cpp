#include "frisson/error.hpp"

namespace frisson {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_parameter: return "invalid_parameter";
        case ErrorCode::invalid_input: return "invalid_input";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::protocol_violation: return "protocol_violation";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::encode_error: return "encode_error";
        case ErrorCode::format_error: return "format_error";
        case ErrorCode::insufficient_data: return "insufficient_data";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::ts_regression: return "ts_regression";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

}  // namespace frisson
