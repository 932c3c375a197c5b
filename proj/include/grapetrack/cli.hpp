#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grapetrack {

/// Runs one command line; args[0] is the program name. Results go to `out`,
/// diagnostics to `err`. Returns 0 on success, 2 for invalid input or
/// usage, 1 for internal errors.
///
/// `--config FILE` after the subcommand reads `key=value` lines (keys are
/// long flag names without the dashes, '#' starts a comment). Flags given on
/// the command line win over the file.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grapetrack
