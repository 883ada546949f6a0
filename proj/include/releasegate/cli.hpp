// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace releasegate {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 2,
  exit_io = 3,
  exit_validation = 4,
  exit_planning = 5,
  exit_realization = 6,
  exit_gateway = 7,
  exit_bench_incomplete = 8,
};

/// Runs the command-line tool. `args` excludes the program name. Output goes to `out`,
/// diagnostics to `err`. `serve` blocks until SIGINT or SIGTERM.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace releasegate
