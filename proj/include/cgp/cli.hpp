#pragma once

#include <ostream>

namespace cgp {

/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
/// failure, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cgp
