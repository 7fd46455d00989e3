#pragma once

#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gridbook/workbook.hpp"

namespace gridbook {

struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& what) : std::runtime_error(what), line(0) {}
    LoadError(const std::string& what, int line) : std::runtime_error(what + ", line " + std::to_string(line)), line(line) {}
    int line;  // 0 when the error is not tied to a source line
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool is_numeric_token(const std::string& s) {
    size_t i = 0;
    if (i < s.size() && s[i] == '-') ++i;
    size_t d0 = i;
    while (i < s.size() && std::isdigit((unsigned char)s[i])) ++i;
    if (i == d0) return false;
    if (i < s.size() && s[i] == '.') {
        ++i;
        size_t d1 = i;
        while (i < s.size() && std::isdigit((unsigned char)s[i])) ++i;
        if (i == d1) return false;
    }
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        size_t d2 = i;
        while (i < s.size() && std::isdigit((unsigned char)s[i])) ++i;
        if (i == d2) return false;
    }
    return i == s.size();
}

inline std::optional<ErrorKind> error_literal_of(const std::string& s) {
    if (s == "#N/A") return ErrorKind::NA;
    if (s == "#DIV/0!") return ErrorKind::DIV0;
    if (s == "#VALUE!") return ErrorKind::VALUE;
    if (s == "#REF!") return ErrorKind::REF;
    if (s == "#NAME?") return ErrorKind::NAME;
    if (s == "#NUM!") return ErrorKind::NUM;
    return std::nullopt;
}

inline std::optional<std::string> parse_text_literal(const std::string& s) {
    if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::nullopt;
    std::string out;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] == '"') {
            if (i + 2 >= s.size() || s[i + 1] != '"') return std::nullopt;
            out += '"';
            ++i;
        } else {
            out += s[i];
        }
    }
    return out;
}

// NAME = REF target: Sheet!$A$1 or Sheet!$A$1:$B$2, quoted sheet allowed
inline std::optional<DefinedName> parse_name_target(const std::string& name, const std::string& reftext) {
    try {
        AstPtr ast = parse("=" + reftext);
        if (auto* r = ast_as<Ast::RefNode>(ast)) {
            if (!r->ref.sheet || r->ref.workbook) return std::nullopt;
            return DefinedName{name, r->ref, std::nullopt};
        }
        if (auto* rg = ast_as<Ast::RangeNode>(ast)) {
            if (!rg->first.sheet || rg->first.workbook) return std::nullopt;
            return DefinedName{name, rg->first, rg->second};
        }
    } catch (const ParseError&) {
    }
    return std::nullopt;
}

}  // namespace detail

inline Workbook load_gridbook(const std::string& text) {
    Workbook wb;
    Sheet* current = nullptr;
    bool in_names = false;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            auto close = line.find(']');
            if (close == std::string::npos) throw LoadError("unterminated section header", lineno);
            std::string body = detail::trim(line.substr(1, close - 1));
            if (ci_equal(body, "names")) {
                in_names = true;
                current = nullptr;
                continue;
            }
            if (body.size() > 6 && ci_equal(body.substr(0, 6), "sheet ")) {
                std::string name = detail::trim(body.substr(6));
                if (name.empty()) throw LoadError("empty sheet name", lineno);
                in_names = false;
                current = &wb.sheet_or_create(name);
                continue;
            }
            throw LoadError("unknown section '" + body + "'", lineno);
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("expected 'ADDR = CONTENT'", lineno);
        std::string lhs = detail::trim(line.substr(0, eq));
        std::string rhs = detail::trim(line.substr(eq + 1));
        if (in_names) {
            if (!is_valid_name(lhs)) {
                if (parse_a1(lhs))
                    throw LoadError("name '" + lhs + "' is shaped like a cell address", lineno);
                throw LoadError("invalid name '" + lhs + "'", lineno);
            }
            if (wb.find_name(lhs)) throw LoadError("duplicate name " + lhs, lineno);
            auto dn = detail::parse_name_target(lhs, rhs);
            if (!dn) throw LoadError("invalid name target '" + rhs + "'", lineno);
            if (!wb.find_sheet(*dn->target_first.sheet))
                throw LoadError("name target sheet '" + *dn->target_first.sheet + "' does not exist", lineno);
            wb.names.push_back(std::move(*dn));
            continue;
        }
        if (!current) throw LoadError("cell outside any [sheet] section", lineno);
        auto a1 = parse_a1(lhs);
        if (!a1 || a1->col_abs || a1->row_abs) throw LoadError("invalid address " + lhs, lineno);
        if (current->cell_at(a1->col, a1->row))
            throw LoadError("duplicate cell " + current->name + "!" + lhs, lineno);
        Cell cell;
        if (!rhs.empty() && rhs[0] == '=') {
            try {
                cell = Cell::of_formula(rhs);
            } catch (const ParseError& e) {
                throw LoadError(std::string("formula error at ") + lhs + ": " + e.what(), lineno);
            }
        } else if (!rhs.empty() && rhs[0] == '{') {
            throw LoadError("array formulas are not supported", lineno);
        } else if (rhs == "TRUE") {
            cell = Cell::of_value(Value::boolean(true));
        } else if (rhs == "FALSE") {
            cell = Cell::of_value(Value::boolean(false));
        } else if (auto err = detail::error_literal_of(rhs)) {
            cell = Cell::of_value(Value::error(*err));
        } else if (detail::is_numeric_token(rhs)) {
            cell = Cell::of_value(Value::number(std::stod(rhs)));
        } else if (auto txt = detail::parse_text_literal(rhs)) {
            cell = Cell::of_value(Value::text(std::move(*txt)));
        } else {
            throw LoadError("unrecognized cell content '" + rhs + "'", lineno);
        }
        current->set(a1->col, a1->row, std::move(cell));
    }
    return wb;
}

// Canonical text: sheets in insertion order, cells row-major, names last.
inline std::string save_gridbook(const Workbook& wb) {
    std::string out;
    for (const auto& sheet : wb.sheets) {
        out += "[sheet " + sheet.name + "]\n";
        for (const auto& [key, cell] : sheet.cells) {
            out += column_letters(key.second) + std::to_string(key.first) + " = ";
            if (cell.is_formula()) {
                out += cell.formula().text;
            } else {
                const Value& v = cell.literal();
                if (v.is_text())
                    out += quote_text_literal(v.as_text());
                else
                    out += to_display(v);
            }
            out += '\n';
        }
    }
    if (!wb.names.empty()) {
        out += "[names]\n";
        for (const auto& n : wb.names) {
            Ref f = n.target_first;
            f.col_abs = f.row_abs = true;
            out += n.name + " = " + ref_a1(f);
            if (n.target_second) {
                Ref s = *n.target_second;
                s.col_abs = s.row_abs = true;
                out += ":" + ref_a1_local(s);
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace gridbook
