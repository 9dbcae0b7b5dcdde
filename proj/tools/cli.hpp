#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cascade_lab::cli {

enum ExitCode : int { Ok = 0, BadConfig = 2, Precondition = 3, Runtime = 4 };

/// Runs one invocation. `args` excludes the program name. JSON results go to `out`,
/// diagnostics to `err`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace cascade_lab::cli
