#include "allocnas/toml.hpp"

#include "allocnas/errors.hpp"

#include <cctype>
#include <charconv>

namespace allocnas::toml {

namespace {

class LineParser {
public:
    LineParser(std::string_view text, int line) : s_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError("config line " + std::to_string(line_) + ": " + what);
    }

    void skip_ws()
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
            ++pos_;
    }

    bool at_end_or_comment()
    {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    std::string key()
    {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '"')
            return basic_string();
        const auto start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-'))
            ++pos_;
        if (pos_ == start)
            fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string dotted_key()
    {
        std::string k = key();
        skip_ws();
        while (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            k += "." + key();
            skip_ws();
        }
        return k;
    }

    void expect(char c)
    {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    Value value(bool allow_array = true)
    {
        skip_ws();
        if (pos_ >= s_.size())
            fail("missing value");
        Value v;
        v.line = line_;
        const char c = s_[pos_];
        if (c == '"') {
            v.data = basic_string();
        } else if (c == '[') {
            if (!allow_array)
                fail("nested arrays are not supported");
            ++pos_;
            Array items;
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
            } else {
                while (true) {
                    items.push_back(value(false));
                    skip_ws();
                    if (pos_ < s_.size() && s_[pos_] == ',') {
                        ++pos_;
                        skip_ws();
                        if (pos_ < s_.size() && s_[pos_] == ']') {
                            ++pos_;
                            break;
                        }
                        continue;
                    }
                    expect(']');
                    break;
                }
            }
            v.data = std::move(items);
        } else if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            v.data = true;
        } else if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            v.data = false;
        } else {
            v.data = number();
        }
        return v;
    }

private:
    std::string basic_string()
    {
        ++pos_; // opening quote
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size())
                    fail("unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= s_.size())
            fail("unterminated string");
        ++pos_;
        return out;
    }

    std::variant<bool, std::int64_t, double, std::string, Array> number()
    {
        const auto start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '+' ||
                                    s_[pos_] == '-' || s_[pos_] == '.' || s_[pos_] == '_'))
            ++pos_;
        std::string token;
        for (char c : s_.substr(start, pos_ - start))
            if (c != '_')
                token += c;
        if (token.empty())
            fail("expected a value");
        const bool is_float = token.find_first_of(".eE") != std::string::npos;
        const char* first = token.data() + (token.front() == '+' ? 1 : 0);
        const char* last = token.data() + token.size();
        if (is_float) {
            double d = 0.0;
            auto [p, ec] = std::from_chars(first, last, d);
            if (ec != std::errc() || p != last)
                fail("bad number '" + token + "'");
            return d;
        }
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(first, last, i);
        if (ec != std::errc() || p != last)
            fail("bad value '" + token + "'");
        return i;
    }

    std::string_view s_;
    int line_;
    std::size_t pos_ = 0;
};

} // namespace

Table parse(const std::string& text)
{
    Table table;
    std::string section;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos)
            end = text.size();
        std::string_view line(text.data() + start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        ++line_no;
        start = end + 1;

        LineParser p(line, line_no);
        if (p.at_end_or_comment())
            continue;
        p.skip_ws();
        if (line.find_first_not_of(" \t") != std::string_view::npos && line[line.find_first_not_of(" \t")] == '[') {
            p.expect('[');
            section = p.dotted_key();
            p.expect(']');
            if (!p.at_end_or_comment())
                p.fail("unexpected text after section header");
            continue;
        }
        const auto key = p.dotted_key();
        p.expect('=');
        auto v = p.value();
        if (!p.at_end_or_comment())
            p.fail("unexpected text after value");
        const auto full = section.empty() ? key : section + "." + key;
        if (!table.emplace(full, std::move(v)).second)
            p.fail("duplicate key '" + full + "'");
    }
    return table;
}

} // namespace allocnas::toml
