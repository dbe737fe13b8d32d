#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace matchbench {

// Exit codes: 0 success, 1 validation or domain error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace matchbench
