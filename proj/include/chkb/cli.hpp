#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chkb {

// Runs one CLI invocation. Exit status: 0 success, 1 validation errors,
// 2 runtime errors and usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chkb
