#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rcm/config.hpp"

namespace rcm::cli {

enum ExitCode { kOk = 0, kAssertionFailure = 1, kUsage = 2 };

// args excludes the program name. Environment overrides are read through
// `env`; pass nullptr to ignore the process environment.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env);
int dispatch(int argc, char** argv);

// "geometric:lo,hi,n", "linear:lo,hi,n" or "list:a,b,...".
std::vector<double> parse_grid(const std::string& spec);

// Resolves --out against the configured output directory; throws ConfigError
// when the result would leave it.
std::string resolve_output(const RunConfig& cfg, const std::string& out, const std::string& fallback);

}  // namespace rcm::cli
