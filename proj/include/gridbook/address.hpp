#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <tuple>

namespace gridbook {

constexpr int kMaxCol = 16384;    // XFD
constexpr int kMaxRow = 1048576;

inline char ascii_upper(char c) { return (c >= 'a' && c <= 'z') ? char(c - 'a' + 'A') : c; }
inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

inline bool ci_equal(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (ascii_upper(a[i]) != ascii_upper(b[i])) return false;
    return true;
}

inline bool ci_less(const std::string& a, const std::string& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](char x, char y) { return ascii_upper(x) < ascii_upper(y); });
}

struct CiLess {
    bool operator()(const std::string& a, const std::string& b) const { return ci_less(a, b); }
};

// 1 -> "A", 27 -> "AA", 16384 -> "XFD"
inline std::string column_letters(int col) {
    std::string s;
    while (col > 0) {
        int rem = (col - 1) % 26;
        s.insert(s.begin(), char('A' + rem));
        col = (col - 1) / 26;
    }
    return s;
}

// returns 0 when the text is not a valid in-bounds column
inline int parse_column(const std::string& letters) {
    if (letters.empty() || letters.size() > 3) return 0;
    long col = 0;
    for (char c : letters) {
        char u = ascii_upper(c);
        if (u < 'A' || u > 'Z') return 0;
        col = col * 26 + (u - 'A' + 1);
    }
    return col <= kMaxCol ? int(col) : 0;
}

struct CellAddress {
    std::string sheet;
    int col = 1;  // 1-based
    int row = 1;  // 1-based

    std::string a1() const { return column_letters(col) + std::to_string(row); }
    std::string full() const { return sheet + "!" + a1(); }

    bool operator==(const CellAddress& o) const {
        return col == o.col && row == o.row && ci_equal(sheet, o.sheet);
    }
    bool operator!=(const CellAddress& o) const { return !(*this == o); }
    bool operator<(const CellAddress& o) const {
        if (!ci_equal(sheet, o.sheet)) return ci_less(sheet, o.sheet);
        return std::tie(row, col) < std::tie(o.row, o.col);
    }
};

// "B12" / "$B$12" -> (col,row,col_abs,row_abs); nullopt if malformed or out of bounds
struct ParsedA1 {
    int col = 0, row = 0;
    bool col_abs = false, row_abs = false;
};

inline std::optional<ParsedA1> parse_a1(const std::string& text) {
    ParsedA1 out;
    size_t i = 0;
    if (i < text.size() && text[i] == '$') { out.col_abs = true; ++i; }
    size_t ls = i;
    while (i < text.size() && std::isalpha((unsigned char)text[i])) ++i;
    if (i == ls || i - ls > 3) return std::nullopt;
    out.col = parse_column(text.substr(ls, i - ls));
    if (out.col == 0) return std::nullopt;
    if (i < text.size() && text[i] == '$') { out.row_abs = true; ++i; }
    size_t ds = i;
    while (i < text.size() && std::isdigit((unsigned char)text[i])) ++i;
    if (i == ds || i != text.size()) return std::nullopt;
    if (text[ds] == '0') return std::nullopt;
    long row = 0;
    for (size_t k = ds; k < i; ++k) {
        row = row * 10 + (text[k] - '0');
        if (row > kMaxRow) return std::nullopt;
    }
    out.row = int(row);
    return out;
}

inline bool is_valid_name(const std::string& s) {
    if (s.empty()) return false;
    char c0 = s[0];
    if (!(std::isalpha((unsigned char)c0) || c0 == '_')) return false;
    for (char c : s)
        if (!(std::isalnum((unsigned char)c) || c == '_' || c == '.')) return false;
    if (parse_a1(s)) return false;  // names must not look like cell addresses
    return true;
}

// Cell or range reference as written in a formula.  `col_only` marks a
// whole-column endpoint (as in B:C), whose row axis is unspecified.
struct Ref {
    std::optional<std::string> workbook;   // external book binding name
    std::optional<std::string> sheet;
    int col = 0;
    int row = 0;
    bool col_abs = false;
    bool row_abs = false;
    bool col_only = false;

    bool operator==(const Ref& o) const {
        if (workbook.has_value() != o.workbook.has_value()) return false;
        if (workbook && !ci_equal(*workbook, *o.workbook)) return false;
        if (sheet.has_value() != o.sheet.has_value()) return false;
        if (sheet && !ci_equal(*sheet, *o.sheet)) return false;
        return col == o.col && row == o.row && col_abs == o.col_abs && row_abs == o.row_abs &&
               col_only == o.col_only;
    }
    bool operator!=(const Ref& o) const { return !(*this == o); }
};

}  // namespace gridbook
