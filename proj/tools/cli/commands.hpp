#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tmfm::cli {

/// Exit codes: 0 ok, 2 input error, 3 numerical failure, 4 config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tmfm::cli
