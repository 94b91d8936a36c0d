#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace omnic {

/// Ordered key=value entries.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Value parsers for flat key=value documents. Each throws ConfigError naming
// the key when the text is malformed.
std::size_t parse_size_value(std::string_view key, std::string_view text);
std::uint64_t parse_u64_value(std::string_view key, std::string_view text);
double parse_double_value(std::string_view key, std::string_view text);
bool parse_bool_value(std::string_view key, std::string_view text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// Lines "key=value"; blank lines and lines starting with '#' are skipped,
/// whitespace around keys and values is trimmed. Throws ConfigError on a line
/// without '=' or an empty key, with the 1-based line number.
KeyValues parse_key_values(std::string_view text);

std::string format_key_values(const KeyValues& entries);

}  // namespace omnic
