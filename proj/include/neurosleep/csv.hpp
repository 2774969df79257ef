#pragma once

// Minimal comma-separated helpers for the numeric tables the tools read and write.

#include <string>
#include <string_view>
#include <vector>

namespace neurosleep::csv {

// Shortest round-trip representation; "NA" for NaN.
std::string num(double v);

// Splits text into rows of fields after checking the first line equals `header`.
// Blank lines are skipped. Fields are not quoted.
std::vector<std::vector<std::string>> parse(const std::string& text, std::string_view header);

double to_double(const std::string& field);
long long to_int(const std::string& field);

}  // namespace neurosleep::csv
