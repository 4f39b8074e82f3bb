#pragma once

#include <string>
#include <vector>

namespace coulvil {

// Batch front-end; returns the process exit status.  Kept out of main() so
// tests can drive it in-process.
int cli_run(const std::vector<std::string>& args);

}  // namespace coulvil
