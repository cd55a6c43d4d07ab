#ifndef HAMDRIFT_CLI_RUNNER_HPP
#define HAMDRIFT_CLI_RUNNER_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace hamdrift::cli {

/// Full command-line entry point (everything after argv[0]).
/// Returns the process exit code: 0 success, 1 usage/config error,
/// 2 runtime failure (partial artifacts are listed in MANIFEST).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace hamdrift::cli

#endif
