#pragma once

#include <string_view>

namespace bodyfit {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 check failure, 2 usage or I/O error.
int run_cli(int argc, char** argv);

}  // namespace bodyfit
