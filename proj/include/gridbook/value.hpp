#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

namespace gridbook {

enum class ErrorKind { NA, DIV0, VALUE, REF, NAME, NUM, CYCLE };

inline const char* error_text(ErrorKind k) {
    switch (k) {
        case ErrorKind::NA: return "#N/A";
        case ErrorKind::DIV0: return "#DIV/0!";
        case ErrorKind::VALUE: return "#VALUE!";
        case ErrorKind::REF: return "#REF!";
        case ErrorKind::NAME: return "#NAME?";
        case ErrorKind::NUM: return "#NUM!";
        case ErrorKind::CYCLE: return "#CYCLE!";
    }
    return "#VALUE!";
}

struct Blank {
    bool operator==(const Blank&) const { return true; }
};

// number | text | boolean | error | blank
class Value {
public:
    Value() : v_(Blank{}) {}
    static Value number(double d) { return Value(d); }
    static Value text(std::string s) { return Value(std::move(s)); }
    static Value boolean(bool b) { return Value(b); }
    static Value error(ErrorKind k) { return Value(k); }
    static Value blank() { return Value(); }

    bool is_number() const { return std::holds_alternative<double>(v_); }
    bool is_text() const { return std::holds_alternative<std::string>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_error() const { return std::holds_alternative<ErrorKind>(v_); }
    bool is_blank() const { return std::holds_alternative<Blank>(v_); }

    double as_number() const { return std::get<double>(v_); }
    const std::string& as_text() const { return std::get<std::string>(v_); }
    bool as_bool() const { return std::get<bool>(v_); }
    ErrorKind as_error() const { return std::get<ErrorKind>(v_); }

    bool operator==(const Value& o) const { return v_ == o.v_; }
    bool operator!=(const Value& o) const { return !(*this == o); }

private:
    explicit Value(double d) : v_(d) {}
    explicit Value(std::string s) : v_(std::move(s)) {}
    explicit Value(bool b) : v_(b) {}
    explicit Value(ErrorKind k) : v_(k) {}
    std::variant<Blank, double, std::string, bool, ErrorKind> v_;
};

// Shortest decimal text that parses back to exactly the same double.
inline std::string format_number(double d) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    (void)ec;
    return std::string(buf, end);
}

inline std::string to_display(const Value& v) {
    if (v.is_blank()) return "";
    if (v.is_number()) return format_number(v.as_number());
    if (v.is_text()) return v.as_text();
    if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
    return error_text(v.as_error());
}

}  // namespace gridbook
