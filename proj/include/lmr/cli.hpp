#pragma once

#include <iosfwd>

namespace lmr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kBias = 3 };

// Parses argv, validates every argument, then runs one verb:
//   run, bench, trace, memory, escalations, eval, cost.
// Nothing is written to disk before validation succeeds.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lmr::cli
