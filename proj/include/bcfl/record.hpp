#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace bcfl {

inline constexpr std::size_t kFeatureCount = 18;

using FeatureVector = std::array<double, kFeatureCount>;

/// One labeled sensor reading: 18 channels plus failure flag (1 = failure).
struct Record {
  FeatureVector features{};
  int label = 0;

  bool operator==(const Record&) const = default;
};

/// Throws ContractViolation unless every feature is finite and label is 0 or 1.
void validate(const Record& record);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Strict parse of a full decimal token; nullopt on any trailing garbage.
std::optional<double> parse_number(std::string_view text);

}  // namespace bcfl
