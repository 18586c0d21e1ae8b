#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gensheet::gen {

/// Parses a flat array of string literals such as `["a", 'b']`. Single or
/// double quotes and surrounding whitespace are accepted; anything else
/// (prose around the array, trailing commas, non-string items) is rejected.
std::optional<std::vector<std::string>> parse_array_literal(std::string_view text);

/// Renders items as a double-quoted array literal: `["a", "b"]`.
std::string format_array_literal(const std::vector<std::string>& items);

}  // namespace gensheet::gen
