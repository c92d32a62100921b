#pragma once
// The `ooc` command line. Kept in the library so tests can drive it in
// process with their own streams.

#include <iosfwd>
#include <string>
#include <vector>

#include "ooc/error.hpp"

namespace ooc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

int exit_code(ErrorKind kind);

// args excludes the program name. Data goes to `out`, logs and errors to `err`;
// `in` feeds the repl and stdin-driven tokenize.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace ooc::cli
