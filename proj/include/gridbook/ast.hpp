#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gridbook/address.hpp"
#include "gridbook/value.hpp"

namespace gridbook {

struct Ast;
using AstPtr = std::shared_ptr<const Ast>;

enum class BinOp { Pow, Mul, Div, Add, Sub, Concat, Eq, Ne, Lt, Le, Gt, Ge };

inline const char* binop_text(BinOp op) {
    switch (op) {
        case BinOp::Pow: return "^";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Concat: return "&";
        case BinOp::Eq: return "=";
        case BinOp::Ne: return "<>";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
    }
    return "?";
}

// precedence levels; higher binds tighter
inline int binop_prec(BinOp op) {
    switch (op) {
        case BinOp::Pow: return 50;
        case BinOp::Mul:
        case BinOp::Div: return 40;
        case BinOp::Add:
        case BinOp::Sub: return 30;
        case BinOp::Concat: return 20;
        default: return 10;  // comparisons
    }
}
constexpr int kPrecUnaryMinus = 60;
constexpr int kPrecPercent = 70;
constexpr int kPrecAtom = 100;

struct SourceSpan {
    int offset = 0;
    int length = 0;
};

struct Ast {
    struct NumberLit { double value; };
    struct TextLit { std::string value; };
    struct BoolLit { bool value; };
    struct ErrorLit { ErrorKind kind; };
    struct RefNode { Ref ref; };
    struct RangeNode { Ref first, second; };
    struct NameNode {
        std::optional<std::string> workbook;
        std::string name;
    };
    struct Unary {
        char op;  // '-' prefix or '%' postfix
        AstPtr operand;
    };
    struct Binary {
        BinOp op;
        AstPtr lhs, rhs;
    };
    struct Call {
        std::string func;  // stored uppercase
        std::vector<AstPtr> args;
    };

    using Node =
        std::variant<NumberLit, TextLit, BoolLit, ErrorLit, RefNode, RangeNode, NameNode, Unary, Binary, Call>;

    Node node;
    bool grouped = false;  // wrapped in explicit parentheses in the source
    SourceSpan span;
};

inline AstPtr make_ast(Ast::Node n, bool grouped = false, SourceSpan span = {}) {
    auto a = std::make_shared<Ast>();
    a->node = std::move(n);
    a->grouped = grouped;
    a->span = span;
    return a;
}

template <class T>
const T* ast_as(const AstPtr& a) {
    return a ? std::get_if<T>(&a->node) : nullptr;
}

// Structural equality; spans ignored, grouping flags significant.
inline bool ast_equal(const AstPtr& a, const AstPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->grouped != b->grouped) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto* n = std::get_if<Ast::NumberLit>(&a->node))
        return n->value == std::get<Ast::NumberLit>(b->node).value;
    if (auto* t = std::get_if<Ast::TextLit>(&a->node))
        return t->value == std::get<Ast::TextLit>(b->node).value;
    if (auto* bl = std::get_if<Ast::BoolLit>(&a->node))
        return bl->value == std::get<Ast::BoolLit>(b->node).value;
    if (auto* e = std::get_if<Ast::ErrorLit>(&a->node))
        return e->kind == std::get<Ast::ErrorLit>(b->node).kind;
    if (auto* r = std::get_if<Ast::RefNode>(&a->node))
        return r->ref == std::get<Ast::RefNode>(b->node).ref;
    if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
        const auto& o = std::get<Ast::RangeNode>(b->node);
        return rg->first == o.first && rg->second == o.second;
    }
    if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
        const auto& o = std::get<Ast::NameNode>(b->node);
        if (nm->workbook.has_value() != o.workbook.has_value()) return false;
        if (nm->workbook && !ci_equal(*nm->workbook, *o.workbook)) return false;
        return ci_equal(nm->name, o.name);
    }
    if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
        const auto& o = std::get<Ast::Unary>(b->node);
        return u->op == o.op && ast_equal(u->operand, o.operand);
    }
    if (auto* bi = std::get_if<Ast::Binary>(&a->node)) {
        const auto& o = std::get<Ast::Binary>(b->node);
        return bi->op == o.op && ast_equal(bi->lhs, o.lhs) && ast_equal(bi->rhs, o.rhs);
    }
    const auto& c = std::get<Ast::Call>(a->node);
    const auto& o = std::get<Ast::Call>(b->node);
    if (!ci_equal(c.func, o.func) || c.args.size() != o.args.size()) return false;
    for (size_t i = 0; i < c.args.size(); ++i)
        if (!ast_equal(c.args[i], o.args[i])) return false;
    return true;
}

inline int node_count(const AstPtr& a) {
    if (!a) return 0;
    if (auto* u = std::get_if<Ast::Unary>(&a->node)) return 1 + node_count(u->operand);
    if (auto* b = std::get_if<Ast::Binary>(&a->node)) return 1 + node_count(b->lhs) + node_count(b->rhs);
    if (auto* c = std::get_if<Ast::Call>(&a->node)) {
        int n = 1;
        for (const auto& arg : c->args) n += node_count(arg);
        return n;
    }
    return 1;
}

inline int ast_depth(const AstPtr& a) {
    if (!a) return 0;
    if (auto* u = std::get_if<Ast::Unary>(&a->node)) return 1 + ast_depth(u->operand);
    if (auto* b = std::get_if<Ast::Binary>(&a->node)) return 1 + std::max(ast_depth(b->lhs), ast_depth(b->rhs));
    if (auto* c = std::get_if<Ast::Call>(&a->node)) {
        int d = 0;
        for (const auto& arg : c->args) d = std::max(d, ast_depth(arg));
        return 1 + d;
    }
    return 1;
}

inline int ast_prec(const AstPtr& a) {
    if (auto* u = std::get_if<Ast::Unary>(&a->node)) return u->op == '-' ? kPrecUnaryMinus : kPrecPercent;
    if (auto* b = std::get_if<Ast::Binary>(&a->node)) return binop_prec(b->op);
    return kPrecAtom;
}

}  // namespace gridbook
