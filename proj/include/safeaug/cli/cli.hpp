#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace safeaug::cli {

/// Full command-line surface, callable in-process (tests drive it directly;
/// the binary in tools/ forwards argv). Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace safeaug::cli
