#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crowdest {

// Entry point shared by the binary and the tests. args excludes the program
// name. Returns 0 on success, 1 on runtime failures (infeasible systems,
// failed answer sources, non-convergence), 2 on usage, file or config
// errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crowdest
