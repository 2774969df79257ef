#include "neurosleep/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "neurosleep/errors.hpp"

namespace neurosleep::csv {

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::vector<std::string>> parse(const std::string& text, std::string_view header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw FormatError("csv: expected header '" + std::string(header) + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      fields.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double to_double(const std::string& field) {
  if (field == "NA") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("csv: not a number: '" + field + "'");
  }
  return v;
}

long long to_int(const std::string& field) {
  long long v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("csv: not an integer: '" + field + "'");
  }
  return v;
}

}  // namespace neurosleep::csv
