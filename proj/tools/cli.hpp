#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "frisson/signal_core.hpp"

namespace frisson::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
};

/// Entry point shared by the `frisson` binary and the tests. `serve` blocks
/// until SIGINT or SIGTERM.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Reads a JSON object whose keys are PipelineConfig field names; absent keys
/// keep their defaults, unknown keys are rejected with Error(format_error).
PipelineConfig load_config(const std::filesystem::path& file);
PipelineConfig parse_config(std::string_view json_text);

}  // namespace frisson::cli
