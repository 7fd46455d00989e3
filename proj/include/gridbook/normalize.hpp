#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gridbook/ast.hpp"
#include "gridbook/printer.hpp"

namespace gridbook {

// A FormulaAst whose relative reference axes hold signed offsets from an
// origin cell (R1C1 style); absolute axes keep their 1-based indices.
struct NormalizedAst {
    AstPtr root;

    bool operator==(const NormalizedAst& o) const { return ast_equal(root, o.root); }
    std::string text() const { return serialize_normalized(root); }
};

namespace detail {

inline Ref shift_ref(const Ref& r, int dcol, int drow) {
    Ref out = r;
    if (!out.col_abs) out.col += dcol;
    if (!out.row_abs && !out.col_only) out.row += drow;
    return out;
}

template <class RefFn>
AstPtr map_refs(const AstPtr& a, RefFn&& fn) {
    auto b = std::make_shared<Ast>(*a);
    if (auto* r = std::get_if<Ast::RefNode>(&b->node)) {
        r->ref = fn(r->ref);
    } else if (auto* rg = std::get_if<Ast::RangeNode>(&b->node)) {
        rg->first = fn(rg->first);
        rg->second = fn(rg->second);
    } else if (auto* u = std::get_if<Ast::Unary>(&b->node)) {
        u->operand = map_refs(u->operand, fn);
    } else if (auto* bi = std::get_if<Ast::Binary>(&b->node)) {
        bi->lhs = map_refs(bi->lhs, fn);
        bi->rhs = map_refs(bi->rhs, fn);
    } else if (auto* c = std::get_if<Ast::Call>(&b->node)) {
        for (auto& arg : c->args) arg = map_refs(arg, fn);
    }
    return b;
}

}  // namespace detail

inline NormalizedAst normalize(const AstPtr& ast, const CellAddress& origin) {
    return NormalizedAst{detail::map_refs(ast, [&](const Ref& r) { return detail::shift_ref(r, -origin.col, -origin.row); })};
}

inline AstPtr denormalize(const NormalizedAst& ast, const CellAddress& origin) {
    return detail::map_refs(ast.root, [&](const Ref& r) { return detail::shift_ref(r, origin.col, origin.row); });
}

// The "fill" operation: what the formula at `from` becomes when copied to `to`.
inline AstPtr refill(const AstPtr& ast, const CellAddress& from, const CellAddress& to) {
    return denormalize(normalize(ast, from), to);
}

inline bool copy_equivalent(const AstPtr& a, const CellAddress& at_a, const AstPtr& b, const CellAddress& at_b) {
    return normalize(a, at_a) == normalize(b, at_b);
}

struct SubtreeInfo {
    int count = 0;
    int nodes = 0;
    AstPtr first;                 // first occurrence in walk order
    std::vector<AstPtr> parents;  // immediate parent of each occurrence (null at root)
};

// Every subtree with >= min_nodes nodes, keyed by the canonical serialization
// of the tree as given (normalize first for cross-cell comparisons).
using SubtreeKeyFn = std::function<std::string(const AstPtr&)>;

inline std::map<std::string, SubtreeInfo> subtrees(const AstPtr& root, int min_nodes,
                                                   const SubtreeKeyFn& key = serialize_normalized_expr) {
    std::map<std::string, SubtreeInfo> out;
    struct Walker {
        std::map<std::string, SubtreeInfo>& out;
        int min_nodes;
        const SubtreeKeyFn& key;
        int walk(const AstPtr& a, const AstPtr& parent) {
            int n = 1;
            if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                n += walk(u->operand, a);
            } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                n += walk(b->lhs, a);
                n += walk(b->rhs, a);
            } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                for (const auto& arg : c->args) n += walk(arg, a);
            }
            if (n >= min_nodes) {
                auto& info = out[key(a)];
                if (info.count == 0) {
                    info.first = a;
                    info.nodes = n;
                }
                ++info.count;
                info.parents.push_back(parent);
            }
            return n;
        }
    };
    Walker{out, min_nodes, key}.walk(root, nullptr);
    return out;
}

inline std::map<std::string, SubtreeInfo> subtrees(const NormalizedAst& ast, int min_nodes) {
    return subtrees(ast.root, min_nodes);
}

}  // namespace gridbook
