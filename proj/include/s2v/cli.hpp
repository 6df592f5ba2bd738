#pragma once

#include <ostream>

#include "s2v/error.hpp"

namespace s2v::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRegistration = 3;
inline constexpr int kExitIo = 4;

int exit_code(ErrorCode code);

/// Entry point of the `s2v` tool. Never throws; failures are reported on
/// `err` and mapped onto the exit codes above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace s2v::cli
