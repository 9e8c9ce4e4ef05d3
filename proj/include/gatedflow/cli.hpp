#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gatedflow::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
/// argv[0] is the program name.
int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace gatedflow::cli
