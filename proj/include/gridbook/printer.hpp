#pragma once

#include <string>

#include "gridbook/ast.hpp"

namespace gridbook {

inline bool sheet_needs_quotes(const std::string& s) {
    if (s.empty()) return true;
    if (!(std::isalpha((unsigned char)s[0]) || s[0] == '_')) return true;
    for (char c : s)
        if (!(std::isalnum((unsigned char)c) || c == '_' || c == '.')) return true;
    return false;
}

inline std::string quote_sheet(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += "'";
    return out;
}

// "[book]Sheet!" / "'[book]My Sheet'!" / "Sheet!" / "[book]!" prefix
inline std::string ref_prefix(const std::optional<std::string>& workbook, const std::optional<std::string>& sheet) {
    if (!workbook && !sheet) return "";
    std::string body;
    if (workbook) body += "[" + *workbook + "]";
    if (sheet) body += *sheet;
    bool quote = sheet && sheet_needs_quotes(*sheet);
    if (quote) {
        std::string q = "'";
        if (workbook) q += "[" + *workbook + "]";
        for (char c : *sheet) {
            q += c;
            if (c == '\'') q += '\'';
        }
        q += "'";
        body = q;
    }
    return body + "!";
}

// A1 rendering of one endpoint (no sheet prefix)
inline std::string ref_a1_local(const Ref& r) {
    std::string out;
    if (r.col_abs) out += '$';
    out += column_letters(r.col);
    if (!r.col_only) {
        if (r.row_abs) out += '$';
        out += std::to_string(r.row);
    }
    return out;
}

inline std::string ref_a1(const Ref& r) { return ref_prefix(r.workbook, r.sheet) + ref_a1_local(r); }

// R1C1 rendering used for normalized ASTs: absolute axes keep indices,
// relative axes are bracketed offsets.
inline std::string ref_r1c1_local(const Ref& r) {
    std::string out;
    if (!r.col_only) {
        out += 'R';
        if (r.row_abs)
            out += std::to_string(r.row);
        else
            out += "[" + std::to_string(r.row) + "]";
    }
    out += 'C';
    if (r.col_abs)
        out += std::to_string(r.col);
    else
        out += "[" + std::to_string(r.col) + "]";
    return out;
}

inline std::string ref_r1c1(const Ref& r) { return ref_prefix(r.workbook, r.sheet) + ref_r1c1_local(r); }

inline std::string quote_text_literal(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    out += "\"";
    return out;
}

namespace detail {

enum class RefStyle { A1, R1C1 };

inline void print_expr(std::string& out, const AstPtr& a, RefStyle style);

inline void print_child(std::string& out, const AstPtr& child, int min_prec, RefStyle style) {
    bool need = ast_prec(child) < min_prec;
    bool paren = child->grouped || need;
    if (paren && !child->grouped) {
        // Structure demands parentheses the source never had; emit them so the
        // text stays faithful to the tree (reparse marks the child grouped).
        out += '(';
        print_expr(out, child, style);
        out += ')';
        return;
    }
    print_expr(out, child, style);
}

inline void print_expr(std::string& out, const AstPtr& a, RefStyle style) {
    if (a->grouped) {
        out += '(';
        auto inner = std::make_shared<Ast>(*a);
        inner->grouped = false;
        print_expr(out, inner, style);
        out += ')';
        return;
    }
    if (auto* n = std::get_if<Ast::NumberLit>(&a->node)) {
        out += format_number(n->value);
    } else if (auto* t = std::get_if<Ast::TextLit>(&a->node)) {
        out += quote_text_literal(t->value);
    } else if (auto* b = std::get_if<Ast::BoolLit>(&a->node)) {
        out += b->value ? "TRUE" : "FALSE";
    } else if (auto* e = std::get_if<Ast::ErrorLit>(&a->node)) {
        out += error_text(e->kind);
    } else if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
        out += style == RefStyle::A1 ? ref_a1(r->ref) : ref_r1c1(r->ref);
    } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
        if (style == RefStyle::A1) {
            out += ref_a1(rg->first);
            out += ':';
            out += ref_a1_local(rg->second);
        } else {
            out += ref_r1c1(rg->first);
            out += ':';
            out += ref_r1c1_local(rg->second);
        }
    } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
        if (nm->workbook) out += "[" + *nm->workbook + "]!";
        out += nm->name;
    } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
        if (u->op == '-') {
            out += '-';
            print_child(out, u->operand, kPrecUnaryMinus, style);
        } else {
            print_child(out, u->operand, kPrecPercent, style);
            out += '%';
        }
    } else if (auto* bi = std::get_if<Ast::Binary>(&a->node)) {
        int p = binop_prec(bi->op);
        print_child(out, bi->lhs, p, style);         // left-assoc: same level ok on the left
        out += binop_text(bi->op);
        print_child(out, bi->rhs, p + 1, style);     // same level on the right needs parens
    } else {
        const auto& c = std::get<Ast::Call>(a->node);
        out += c.func;
        out += '(';
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (i) out += ',';
            print_expr(out, c.args[i], style);
        }
        out += ')';
    }
}

}  // namespace detail

// Canonical formula text, leading '='.
inline std::string serialize(const AstPtr& ast) {
    std::string out = "=";
    detail::print_expr(out, ast, detail::RefStyle::A1);
    return out;
}

inline std::string serialize_expr(const AstPtr& ast) {
    std::string out;
    detail::print_expr(out, ast, detail::RefStyle::A1);
    return out;
}

inline std::string serialize_normalized_expr(const AstPtr& ast) {
    std::string out;
    detail::print_expr(out, ast, detail::RefStyle::R1C1);
    return out;
}

inline std::string serialize_normalized(const AstPtr& ast) { return "=" + serialize_normalized_expr(ast); }

}  // namespace gridbook
