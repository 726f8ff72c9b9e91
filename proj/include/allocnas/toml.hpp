#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace allocnas::toml {

// Subset of TOML used by experiment configs: [section] and [dotted.section]
// headers, bare keys, basic strings, integers, floats, booleans and
// single-line arrays of those scalars. Comments start with '#'.

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array> data;
    int line = 0;

    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
    bool is_number() const { return is_int() || std::holds_alternative<double>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }
};

/// Flat table: "section.key" -> value (top-level keys have no prefix).
using Table = std::map<std::string, Value>;

/// Throws ConfigError with a line number on malformed input or duplicate keys.
Table parse(const std::string& text);

} // namespace allocnas::toml
