#pragma once

#include "ftsum/config.hpp"

#include <array>
#include <ostream>
#include <string>
#include <string_view>

namespace ftsum::cli {

inline constexpr std::array<std::string_view, 8> kSubcommands = {
    "extract-facts", "stats", "build-vocab", "train", "decode", "evaluate", "gate-report", "gradcheck"};

std::string usage();

/// Runs one subcommand. Returns the process exit status; module errors are
/// reported on `err` and give a nonzero status.
int dispatch(std::string_view subcommand, const Config& cfg, std::ostream& out, std::ostream& err);

/// Parses argv (global flags, one subcommand, its flags) and dispatches.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ftsum::cli
