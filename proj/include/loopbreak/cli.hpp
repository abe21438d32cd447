#pragma once

#include <ostream>

namespace loopbreak {

/// Entry point of the `loopbreak` tool. Failures print one line
/// `error: <kind>: <message>` to `err`; usage errors use the kind `usage`,
/// are followed by the help text and return 2, other errors return 1.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace loopbreak
