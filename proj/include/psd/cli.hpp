#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace psd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitOptimization = 4,
};

// `args` excludes the program name. Diagnostics go to `err`, progress to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psd
