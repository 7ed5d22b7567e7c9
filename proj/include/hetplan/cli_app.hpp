#pragma once

#include <iosfwd>

namespace hetplan {

// Full command-line front end. Exit codes: 0 success, 1 error, 2 infeasible.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hetplan
