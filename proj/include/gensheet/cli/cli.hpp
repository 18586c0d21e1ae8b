#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gensheet::cli {

/// Exit codes besides 0 and CLI11's own usage codes.
enum Exit : int {
    kErrorCells = 1,
    kLoadFailure = 2,
    kPendingAtTimeout = 3,
    kKitFailure = 4,
};

/// Runs one `gensheet` invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gensheet::cli
