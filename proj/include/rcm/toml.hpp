#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace rcm {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line = 0, int col = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ", col " + std::to_string(col) + ")"
                                      : msg),
          line_(line),
          col_(col) {}
    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_;
    int col_;
};

// TOML subset: tables, arrays of tables, dotted and quoted keys, basic and
// literal strings, integers, floats, booleans, arrays, inline tables.
// Dates and multi-line strings are rejected.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json parse_toml_file(const std::string& path);

}  // namespace rcm
