#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace roitrack::cli {

/// Runs one roitrack command line. args excludes the program name.
/// Returns 0 on success, 1 on a runtime failure (one-line cause on err),
/// 2 on a usage error (usage text on err).
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace roitrack::cli
