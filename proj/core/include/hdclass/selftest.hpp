#pragma once

#include <iosfwd>

namespace hdclass {

/// Runs the built-in property checks and prints one PASS/FAIL line per
/// check. Returns true when every check passed.
bool run_selftest(std::ostream& out, int threads = 0);

}  // namespace hdclass
