#pragma once

#include <ostream>

namespace srcox {

// Exit codes: 0 success, 1 input or usage error, 2 non-convergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srcox
