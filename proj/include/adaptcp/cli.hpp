#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adaptcp::cli {

/// Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure.
int run(int argc, char** argv);
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adaptcp::cli
