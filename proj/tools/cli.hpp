#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mll::cli {

/// Runs one subcommand. args excludes the program name. Returns 0 on
/// success, 1 on a domain or usage error, 2 on a solver failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mll::cli
