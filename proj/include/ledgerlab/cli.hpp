#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ledgerlab {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCriterionViolated = 2;   // also: attack not applicable

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ledgerlab
