// Command-line front end. cli_run is the whole program behind main(), kept
// callable in-process so the test suite can drive full commands.
#pragma once

namespace enrest {

// 0 success, 1 usage or config error, 2 runtime/numeric/IO error
int cli_run(int argc, const char* const* argv);

}  // namespace enrest
