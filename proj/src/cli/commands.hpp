#pragma once

#include <ostream>

namespace dgmm::cli {

/// Runs one command line. Records go to out, "ERROR:<code>: ..." lines to
/// err; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dgmm::cli
