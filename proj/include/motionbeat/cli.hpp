#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace motionbeat {

// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace motionbeat
