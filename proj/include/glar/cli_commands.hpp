#pragma once

namespace glar {

// Full command-line surface: parses argv, dispatches to a subcommand, maps
// every error onto the documented exit codes (1 usage/config, 2 data/IO,
// 3 numeric). The binary's main() is a single call into this.
int run_cli(int argc, const char* const* argv);

}  // namespace glar
