#include "bcfl/record.hpp"

#include <charconv>
#include <cmath>

#include "bcfl/errors.hpp"

namespace bcfl {

void validate(const Record& record) {
  for (double f : record.features) {
    if (!std::isfinite(f)) throw ContractViolation("record feature is not finite");
  }
  if (record.label != 0 && record.label != 1) {
    throw ContractViolation("record label must be 0 or 1, got " + std::to_string(record.label));
  }
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = text.data();
  if (*first == '+') ++first;
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return v;
}

}  // namespace bcfl
