#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace covec::cli {

enum ExitCode : int { ok = 0, usage = 2, pipeline = 3, parse = 4 };

/// Runs one `covec` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace covec::cli
