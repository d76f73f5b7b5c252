#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace alphaadv::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,     ///< bad flags, unreadable inputs, malformed files
    kNumerical = 2, ///< fit/covariance/attack could not produce a trustworthy answer
};

/// Runs one subcommand (fit, attack, sweep-alpha, sweep-l2, mc-check,
/// transfer, gen-data). `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "lo:hi:step" (inclusive) or a comma-separated list.
std::vector<double> parse_grid(const std::string& spec);

} // namespace alphaadv::cli
