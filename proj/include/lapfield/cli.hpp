#pragma once

#include <iosfwd>

namespace lapfield::cli {

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, numerical_failure = 3 };

/// Entry point of the lapfield tool. Diagnostics go to `err`, reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lapfield::cli
