#pragma once

#include <ostream>

namespace sdcap {

// Entry point of the sdcap tool. Results go to `out` as JSON with sorted
// keys, diagnostics to `err`. Returns 0 on success, 1 for configuration and
// input errors, 2 for numeric aborts.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdcap
