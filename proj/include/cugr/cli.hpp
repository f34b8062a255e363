#pragma once

namespace cugr {

// Entry point for the `cugr` command (gen-data, train, eval, rate, verify).
// Returns the process exit status; never throws.
int run_cli(int argc, const char* const* argv);

} // namespace cugr
