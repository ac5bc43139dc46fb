#include "rcm/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

namespace rcm {

namespace {

using nlohmann::json;

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    json run() {
        json root = json::object();
        json* cur = &root;
        for (;;) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                cur = header(root);
            } else {
                keyval(*cur);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(msg, line_, col_); }

    bool eof() const { return pos_ >= s_.size(); }
    char peek(std::size_t k = 0) const { return pos_ + k < s_.size() ? s_[pos_ + k] : '\0'; }
    char get() {
        if (eof()) fail("unexpected end of input");
        const char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        get();
    }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) get();
    }
    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') get();
    }
    void skip_ws_comments_newlines() {
        for (;;) {
            skip_ws();
            skip_comment();
            if (peek() == '\r' && peek(1) == '\n') get();
            if (peek() == '\n') {
                get();
                continue;
            }
            break;
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (peek() == '\r') get();
        if (!eof() && peek() != '\n') fail("expected end of line");
    }

    std::string bare_or_quoted_key() {
        skip_ws();
        if (peek() == '"') return basic_string();
        if (peek() == '\'') return literal_string();
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
        if (k.empty()) fail("expected a key");
        return k;
    }

    std::vector<std::string> key_path() {
        std::vector<std::string> parts{bare_or_quoted_key()};
        skip_ws();
        while (peek() == '.') {
            get();
            parts.push_back(bare_or_quoted_key());
            skip_ws();
        }
        return parts;
    }

    json* header(json& root) {
        expect('[');
        const bool array = peek() == '[';
        if (array) get();
        const auto path = key_path();
        expect(']');
        if (array) expect(']');
        json* node = &root;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) node = descend(*node, path[i]);
        const auto& last = path.back();
        if (array) {
            if (!node->contains(last)) (*node)[last] = json::array();
            auto& arr = (*node)[last];
            if (!arr.is_array()) fail("key '" + last + "' is not an array of tables");
            arr.push_back(json::object());
            return &arr.back();
        }
        if (node->contains(last)) {
            auto& t = (*node)[last];
            if (!t.is_object()) fail("key '" + last + "' redefined as a table");
            if (defined_.count(&t)) fail("table '" + last + "' defined twice");
            defined_.insert(&t);
            return &t;
        }
        (*node)[last] = json::object();
        defined_.insert(&(*node)[last]);
        return &(*node)[last];
    }

    json* descend(json& node, const std::string& k) {
        if (!node.contains(k)) node[k] = json::object();
        json* child = &node[k];
        if (child->is_array() && !child->empty() && child->back().is_object()) return &child->back();
        if (!child->is_object()) fail("key '" + k + "' is not a table");
        return child;
    }

    void keyval(json& table) {
        const auto path = key_path();
        skip_ws();
        expect('=');
        skip_ws();
        json* node = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) node = descend(*node, path[i]);
        if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*node)[path.back()] = value();
    }

    json value() {
        const char c = peek();
        if (c == '"') {
            if (peek(1) == '"' && peek(2) == '"') fail("multi-line strings are not supported");
            return basic_string();
        }
        if (c == '\'') {
            if (peek(1) == '\'' && peek(2) == '\'') fail("multi-line strings are not supported");
            return literal_string();
        }
        if (c == '[') return array();
        if (c == '{') return inline_table();
        if (s_.substr(pos_, 4) == "true") {
            for (int i = 0; i < 4; ++i) get();
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            for (int i = 0; i < 5; ++i) get();
            return false;
        }
        return number();
    }

    std::string basic_string() {
        expect('"');
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            c = get();
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case 'b': out += '\b'; break;
                case 'f': out += '\f'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'u':
                case 'U': {
                    const int n = c == 'u' ? 4 : 8;
                    std::string hex;
                    for (int i = 0; i < n; ++i) hex += get();
                    unsigned long cp = 0;
                    try {
                        cp = std::stoul(hex, nullptr, 16);
                    } catch (...) {
                        fail("bad unicode escape");
                    }
                    append_utf8(out, cp);
                    break;
                }
                default: fail(std::string("bad escape \\") + c);
            }
        }
        return out;
    }

    static void append_utf8(std::string& out, unsigned long cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    std::string literal_string() {
        expect('\'');
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '\'') break;
            out += c;
        }
        return out;
    }

    json array() {
        expect('[');
        json arr = json::array();
        for (;;) {
            skip_ws_comments_newlines();
            if (peek() == ']') {
                get();
                return arr;
            }
            arr.push_back(value());
            skip_ws_comments_newlines();
            if (peek() == ',') {
                get();
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
    }

    json inline_table() {
        expect('{');
        json t = json::object();
        skip_ws();
        if (peek() == '}') {
            get();
            return t;
        }
        for (;;) {
            keyval(t);
            skip_ws();
            if (peek() == ',') {
                get();
                skip_ws();
                continue;
            }
            expect('}');
            return t;
        }
    }

    json number() {
        const int l = line_, c = col_;
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            tok += get();
        if (tok.empty()) throw ConfigError("expected a value", l, c);
        std::string clean;
        for (std::size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == '_') {
                if (i == 0 || i + 1 == tok.size() || !std::isxdigit(static_cast<unsigned char>(tok[i - 1])) ||
                    !std::isxdigit(static_cast<unsigned char>(tok[i + 1])))
                    throw ConfigError("bad underscore in number '" + tok + "'", l, c);
                continue;
            }
            clean += tok[i];
        }
        std::string body = clean;
        bool neg = false;
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
            neg = body[0] == '-';
            body = body.substr(1);
        }
        if (body == "inf") return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'o' || body[1] == 'b')) {
            const int base = body[1] == 'x' ? 16 : body[1] == 'o' ? 8 : 2;
            std::int64_t v = 0;
            const auto* b = body.data() + 2;
            const auto [p, ec] = std::from_chars(b, body.data() + body.size(), v, base);
            if (ec != std::errc() || p != body.data() + body.size()) throw ConfigError("bad integer '" + tok + "'", l, c);
            return neg ? -v : v;
        }
        const bool is_float = body.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            if (body.size() > 1 && body[0] == '0') throw ConfigError("leading zero in '" + tok + "'", l, c);
            std::int64_t v = 0;
            const auto [p, ec] = std::from_chars(clean.data() + (clean[0] == '+' ? 1 : 0), clean.data() + clean.size(), v);
            if (ec != std::errc() || p != clean.data() + clean.size()) throw ConfigError("bad value '" + tok + "'", l, c);
            return v;
        }
        double v = 0.0;
        const auto [p, ec] = std::from_chars(clean.data() + (clean[0] == '+' ? 1 : 0), clean.data() + clean.size(), v);
        if (ec != std::errc() || p != clean.data() + clean.size()) throw ConfigError("bad value '" + tok + "'", l, c);
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    std::set<const json*> defined_;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

nlohmann::json parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_toml(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace rcm
