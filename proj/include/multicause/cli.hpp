#pragma once

#include <iosfwd>

namespace multicause {

/// Entry point for the multicause command-line tool. Reports go to `out`
/// (or the --out file), errors to `err` as a JSON object. Returns 0 on
/// success, 2 for input errors, 3 for identification or rank failures and
/// 4 for convergence failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace multicause
