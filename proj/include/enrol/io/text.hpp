// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace enrol::io {

/// Shortest form that round-trips.
std::string format_double(double v);
/// Fixed notation with `decimals` digits.
std::string format_fixed(double v, int decimals);
/// Whole-string parse; throws FormatError naming `what` on failure.
double parse_double(std::string_view text, const std::string& what);
long long parse_int(std::string_view text, const std::string& what);
/// Comma split without quoting (ids and names never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace enrol::io
