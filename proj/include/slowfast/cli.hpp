#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace slowfast::cli {

/// Runs one subcommand. `args` excludes the program name. Results go to
/// `out` unless an output file is configured; diagnostics go to `err`.
/// Returns 0 on success, 1 on a computation error, 2 on a usage or
/// configuration error.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

/// Fixed-width rendering used by every CSV writer: 17 significant digits.
std::string format_double(double v);

}  // namespace slowfast::cli
