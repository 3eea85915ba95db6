#pragma once

#include <exception>
#include <ostream>

namespace ctnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

/// 2 for validation errors, 3 for numerical failures, 4 for IO errors, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Entry point of the ctnet tool. Results go to out, diagnostics to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctnet
