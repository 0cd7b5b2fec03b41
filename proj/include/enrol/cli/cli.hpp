// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace enrol::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `enrol` tool. Usage errors return 1, data and
/// validation errors 2.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace enrol::cli
