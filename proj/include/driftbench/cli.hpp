#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace driftbench::cli {

/// Parses and runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error; a
/// failure prints exactly one "error: <kind>: <message>" line to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace driftbench::cli
