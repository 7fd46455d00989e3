#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridbook/eval.hpp"
#include "gridbook/normalize.hpp"
#include "gridbook/workbook.hpp"

namespace gridbook {

enum class Severity { Info, Warn, Error };

inline const char* severity_text(Severity s) {
    switch (s) {
        case Severity::Info: return "info";
        case Severity::Warn: return "warn";
        case Severity::Error: return "error";
    }
    return "info";
}

struct Finding {
    int rule = 0;  // 1..11 -> S1..S11
    Severity severity = Severity::Info;
    std::string sheet;
    int col1 = 1, row1 = 1, col2 = 1, row2 = 1;  // rectangular region; single cell when equal
    std::string message;
    std::string evidence;
    std::string suggestion;  // "R1".."R7" or empty

    std::string rule_id() const { return "S" + std::to_string(rule); }
    bool single_cell() const { return col1 == col2 && row1 == row2; }
    std::string location() const {
        std::string a = column_letters(col1) + std::to_string(row1);
        if (single_cell()) return a;
        return a + ":" + column_letters(col2) + std::to_string(row2);
    }
};

struct LintConfig {
    std::set<double> magic_whitelist = {0, 1, -1, 100};
    int long_formula_nodes = 30;
    int long_formula_depth = 7;
    int dup_min_nodes = 4;
    int envy_min_refs = 4;
    int clump_min_size = 3;
    int clump_min_uses = 2;
    std::set<int> rules_enabled = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
};

namespace detail {

inline bool finding_less(const Finding& a, const Finding& b) {
    if (a.rule != b.rule) return a.rule < b.rule;
    if (!ci_equal(a.sheet, b.sheet)) return ci_less(a.sheet, b.sheet);
    auto ta = std::tie(a.row1, a.col1, a.row2, a.col2, a.message);
    auto tb = std::tie(b.row1, b.col1, b.row2, b.col2, b.message);
    return ta < tb;
}

inline Finding at_cell(int rule, Severity sev, const CellAddress& a, std::string msg, std::string evidence = "",
                       std::string suggestion = "") {
    return Finding{rule, sev, a.sheet, a.col, a.row, a.col, a.row, std::move(msg), std::move(evidence),
                   std::move(suggestion)};
}

template <class Fn>
void for_each_formula(const Workbook& wb, Fn&& fn) {
    for (const auto& sheet : wb.sheets)
        for (const auto& [key, cell] : sheet.cells)
            if (cell.is_formula()) fn(CellAddress{sheet.name, key.second, key.first}, cell.formula());
}

inline std::string norm_key(const AstPtr& ast, const CellAddress& at) {
    return serialize_normalized_expr(normalize(ast, at).root);
}

// formula shape with every reference collapsed to a placeholder
inline std::string shape_key(const AstPtr& ast) {
    AstPtr flat = detail::map_refs(ast, [](const Ref&) {
        Ref r;
        r.col = 1;
        r.row = 1;
        return r;
    });
    return serialize_expr(flat);
}

inline std::string join_addresses(const std::vector<CellAddress>& addrs) {
    std::string out;
    for (size_t i = 0; i < addrs.size(); ++i) {
        if (i) out += ", ";
        out += addrs[i].full();
    }
    return out;
}

inline Finding region_finding(int rule, Severity sev, const std::vector<CellAddress>& cells, std::string msg,
                              std::string evidence, std::string suggestion) {
    Finding f;
    f.rule = rule;
    f.severity = sev;
    f.sheet = cells.front().sheet;
    f.col1 = f.col2 = cells.front().col;
    f.row1 = f.row2 = cells.front().row;
    for (const auto& a : cells) {
        f.col1 = std::min(f.col1, a.col);
        f.col2 = std::max(f.col2, a.col);
        f.row1 = std::min(f.row1, a.row);
        f.row2 = std::max(f.row2, a.row);
    }
    f.message = std::move(msg);
    f.evidence = std::move(evidence);
    f.suggestion = std::move(suggestion);
    return f;
}

}  // namespace detail

// ---- S1: duplicated expression ---------------------------------------------

inline std::vector<Finding> s1_duplicated_expression(const Workbook& wb, const LintConfig& cfg) {
    std::vector<Finding> out;

    // within one formula
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        NormalizedAst norm = normalize(fm.ast, at);
        auto subs = subtrees(norm, cfg.dup_min_nodes);
        for (const auto& [key, info] : subs) {
            if (info.count < 2) continue;
            // skip subtrees wholly explained by an equally-duplicated parent
            bool dominated = true;
            for (const auto& parent : info.parents) {
                if (!parent) { dominated = false; break; }
                auto pit = subs.find(serialize_normalized_expr(parent));
                if (pit == subs.end() || pit->second.count != info.count) { dominated = false; break; }
            }
            if (dominated) continue;
            std::string original = serialize_expr(denormalize(NormalizedAst{info.first}, at));
            out.push_back(detail::at_cell(1, Severity::Warn, at,
                                          "expression occurs " + std::to_string(info.count) +
                                              " times in this formula; extract it once",
                                          original, "R1"));
        }
    });

    // across formulas on one sheet; keyed on the A1 text, because identical A1
    // text means identical targets and therefore one extractable value (two
    // copy-equivalent occurrences at different anchors compute different things)
    for (const auto& sheet : wb.sheets) {
        struct KeyInfo {
            std::vector<CellAddress> cells;  // each containing cell once
            std::set<std::string> formula_classes;
            int total = 0;
            std::set<std::string> parent_keys;
            bool any_root = false;
            AstPtr first;
            CellAddress first_at;
        };
        std::map<std::string, KeyInfo> keys;
        for (const auto& [pos, cell] : sheet.cells) {
            if (!cell.is_formula()) continue;
            CellAddress at{sheet.name, pos.second, pos.first};
            std::string cls = normalize(cell.formula().ast, at).text();
            auto subs = subtrees(cell.formula().ast, cfg.dup_min_nodes, serialize_expr);
            for (const auto& [key, info] : subs) {
                auto& ki = keys[key];
                if (ki.cells.empty() || ki.cells.back() != at) ki.cells.push_back(at);
                ki.formula_classes.insert(cls);
                ki.total += info.count;
                for (const auto& p : info.parents) {
                    if (p)
                        ki.parent_keys.insert(serialize_expr(p));
                    else
                        ki.any_root = true;
                }
                if (!ki.first) {
                    ki.first = info.first;
                    ki.first_at = at;
                }
            }
        }
        for (const auto& [key, ki] : keys) {
            if (ki.cells.size() < 2 || ki.formula_classes.size() < 2) continue;
            // maximality: skip if one parent key spans the same cells equally often
            if (!ki.any_root && ki.parent_keys.size() == 1) {
                auto pit = keys.find(*ki.parent_keys.begin());
                if (pit != keys.end() && pit->second.cells == ki.cells && pit->second.total == ki.total) continue;
            }
            std::string original = serialize_expr(ki.first);
            out.push_back(detail::region_finding(
                1, Severity::Warn, ki.cells,
                "expression shared by " + std::to_string(ki.cells.size()) +
                    " non-equivalent formulas (" + detail::join_addresses(ki.cells) + "); extract it once",
                original, "R1"));
        }
    }
    return out;
}

// ---- S2: overlong formula ---------------------------------------------------

namespace detail {

inline std::vector<AstPtr> addition_chain(const AstPtr& ast) {
    std::vector<AstPtr> terms;
    AstPtr cur = ast;
    while (true) {
        if (cur->grouped) break;
        auto* b = std::get_if<Ast::Binary>(&cur->node);
        if (!b || b->op != BinOp::Add) break;
        terms.push_back(b->rhs);
        cur = b->lhs;
    }
    terms.push_back(cur);
    std::reverse(terms.begin(), terms.end());
    return terms;
}

inline bool is_sum_of_products(const AstPtr& ast) {
    auto terms = addition_chain(ast);
    if (terms.size() < 2) return false;
    for (const auto& t : terms) {
        const Ast* inner = t.get();
        auto* m = std::get_if<Ast::Binary>(&inner->node);
        if (!m || m->op != BinOp::Mul) return false;
        auto ok = [](const AstPtr& x) {
            return ast_as<Ast::RefNode>(x) != nullptr || ast_as<Ast::RangeNode>(x) != nullptr;
        };
        if (!ok(m->lhs) || !ok(m->rhs)) return false;
    }
    return true;
}

}  // namespace detail

inline std::vector<Finding> s2_overlong_formula(const Workbook& wb, const LintConfig& cfg) {
    std::vector<Finding> out;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        int nodes = node_count(fm.ast);
        int depth = ast_depth(fm.ast);
        if (nodes <= cfg.long_formula_nodes && depth <= cfg.long_formula_depth) return;
        std::string msg = "formula has " + std::to_string(nodes) + " nodes (depth " + std::to_string(depth) +
                          "); split it into helper cells";
        if (detail::is_sum_of_products(fm.ast)) msg += "; a sum of pairwise products can also become one SUMPRODUCT";
        out.push_back(detail::at_cell(2, Severity::Info, at, msg, std::to_string(nodes), "R7"));
    });
    return out;
}

// ---- S3: magic numbers ------------------------------------------------------

inline std::vector<Finding> s3_magic_number(const Workbook& wb, const LintConfig& cfg) {
    std::vector<Finding> out;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walker {
            std::vector<Finding>& out;
            const LintConfig& cfg;
            const CellAddress& at;
            void walk(const AstPtr& a, const Ast::Call* parent, size_t arg_index) {
                if (auto* n = std::get_if<Ast::NumberLit>(&a->node)) {
                    bool lookup_col = parent && arg_index == 2 &&
                                      (ci_equal(parent->func, "VLOOKUP") || ci_equal(parent->func, "HLOOKUP"));
                    // positional arguments that are structure, not data
                    bool positional = parent && ((ci_equal(parent->func, "DATE") && arg_index >= 1) ||
                                                 (ci_equal(parent->func, "INDEX") && arg_index >= 1) ||
                                                 (ci_equal(parent->func, "MATCH") && arg_index == 2) ||
                                                 (ci_equal(parent->func, "ROUND") && arg_index == 1));
                    if (positional && !lookup_col) return;
                    if (lookup_col) {
                        // literal column indexes silently break when the table is restructured
                        out.push_back(detail::at_cell(
                            3, Severity::Info, at,
                            "literal column index " + format_number(n->value) + " in " + parent->func +
                                "; derive it with MATCH on the column heading instead",
                            format_number(n->value), "R3"));
                        return;
                    }
                    if (cfg.magic_whitelist.count(n->value)) return;
                    out.push_back(detail::at_cell(3, Severity::Info, at,
                                                  "magic number " + format_number(n->value) +
                                                      "; move it to its own named cell",
                                                  format_number(n->value), "R3"));
                    return;
                }
                if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    // -1 reads as one literal
                    if (u->op == '-') {
                        if (auto* n = std::get_if<Ast::NumberLit>(&u->operand->node)) {
                            if (cfg.magic_whitelist.count(-n->value)) return;
                        }
                    }
                    walk(u->operand, nullptr, 0);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    walk(b->lhs, nullptr, 0);
                    walk(b->rhs, nullptr, 0);
                } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    for (size_t i = 0; i < c->args.size(); ++i) walk(c->args[i], c, i);
                }
            }
        };
        Walker{out, cfg, at}.walk(fm.ast, nullptr, 0);
    });
    return out;
}

// ---- S4: irregular regions --------------------------------------------------

namespace detail {

struct LineCell {
    int pos = 0;  // row (column lines) or col (row lines)
    bool formula = false;
    std::string shape;
    std::string norm;
    CellAddress at;
};

inline void s4_scan_line(std::vector<Finding>& out, const std::vector<LineCell>& line) {
    // split into coordinate-contiguous segments
    size_t i = 0;
    while (i < line.size()) {
        size_t j = i;
        while (j + 1 < line.size() && line[j + 1].pos == line[j].pos + 1) ++j;
        // segment [i..j]
        for (size_t k = i + 1; k < j; ++k) {  // interior cells only
            const LineCell& prev = line[k - 1];
            const LineCell& next = line[k + 1];
            const LineCell& cur = line[k];
            if (!prev.formula || !next.formula) continue;
            if (prev.norm != next.norm) continue;
            if (cur.formula && cur.norm == prev.norm) continue;
            // count copy-equivalent neighbors on both sides
            int before = 0;
            for (size_t b = k; b-- > i;) {
                if (!line[b].formula || line[b].norm != prev.norm) break;
                ++before;
            }
            int after = 0;
            for (size_t f2 = k + 1; f2 <= j; ++f2) {
                if (!line[f2].formula || line[f2].norm != prev.norm) break;
                ++after;
            }
            if (before + after < 3) continue;
            if (!cur.formula) {
                out.push_back(at_cell(4, Severity::Error, cur.at,
                                      "constant interrupts a block of " + std::to_string(before + after) +
                                          " copy-equivalent formulas",
                                      "", "R5"));
            } else {
                out.push_back(at_cell(4, Severity::Warn, cur.at,
                                      "formula differs from the " + std::to_string(before + after) +
                                          " copy-equivalent formulas around it",
                                      cur.norm, "R5"));
            }
        }
        // same-shape runs that fail to be copy-equivalent
        size_t k = i;
        while (k <= j) {
            if (!line[k].formula) { ++k; continue; }
            size_t e = k;
            while (e + 1 <= j && line[e + 1].formula && line[e + 1].shape == line[k].shape) ++e;
            if (e - k + 1 >= 3) {
                std::map<std::string, int> classes;
                for (size_t m = k; m <= e; ++m) ++classes[line[m].norm];
                if (classes.size() > 1) {
                    int majority = 0;
                    std::string major_key;
                    for (const auto& [ck, cnt] : classes)
                        if (cnt > majority) { majority = cnt; major_key = ck; }
                    bool single_deviant = classes.size() == 2 && majority == int(e - k) && majority >= 3;
                    if (!single_deviant) {  // single deviants are reported above
                        std::vector<CellAddress> cells;
                        for (size_t m = k; m <= e; ++m) cells.push_back(line[m].at);
                        out.push_back(region_finding(
                            4, Severity::Warn, cells,
                            "block of " + std::to_string(e - k + 1) + " similar formulas is not copy-equivalent (" +
                                std::to_string(classes.size()) + " distinct forms); absolute references or names "
                                "would make one master formula",
                            line[k].norm, "R5"));
                    }
                }
            }
            k = e + 1;
        }
        i = j + 1;
    }
}

}  // namespace detail

inline std::vector<Finding> s4_irregular_region(const Workbook& wb, const LintConfig& cfg) {
    (void)cfg;
    std::vector<Finding> out;
    for (const auto& sheet : wb.sheets) {
        std::map<std::pair<int, int>, detail::LineCell> cells;  // (row,col)
        for (const auto& [pos, cell] : sheet.cells) {
            detail::LineCell lc;
            lc.at = CellAddress{sheet.name, pos.second, pos.first};
            lc.formula = cell.is_formula();
            if (lc.formula) {
                lc.shape = detail::shape_key(cell.formula().ast);
                lc.norm = detail::norm_key(cell.formula().ast, lc.at);
            }
            cells[pos] = std::move(lc);
        }
        std::map<int, std::vector<detail::LineCell>> by_col, by_row;
        for (auto& [pos, lc] : cells) {
            auto c = lc;
            c.pos = pos.first;  // row coordinate along a column line
            by_col[pos.second].push_back(c);
            c.pos = pos.second;
            by_row[pos.first].push_back(c);
        }
        for (auto& [col, line] : by_col) {
            std::sort(line.begin(), line.end(), [](auto& a, auto& b) { return a.pos < b.pos; });
            detail::s4_scan_line(out, line);
        }
        for (auto& [row, line] : by_row) {
            std::sort(line.begin(), line.end(), [](auto& a, auto& b) { return a.pos < b.pos; });
            detail::s4_scan_line(out, line);
        }

        // (c) aggregation ranges that stop one short of a non-blank neighbor
        for (const auto& [pos, cell] : sheet.cells) {
            if (!cell.is_formula()) continue;
            CellAddress at{sheet.name, pos.second, pos.first};
            struct Scan {
                const Sheet& sheet;
                const CellAddress& at;
                std::vector<Finding>& out;
                void walk(const AstPtr& a) {
                    if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                        if ((c->func == "SUM" || c->func == "MAX" || c->func == "MIN") && c->args.size() == 1) {
                            if (auto* rg = ast_as<Ast::RangeNode>(c->args[0])) check(*rg);
                        }
                        for (const auto& arg : c->args) walk(arg);
                    } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                        walk(u->operand);
                    } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                        walk(b->lhs);
                        walk(b->rhs);
                    }
                }
                void check(const Ast::RangeNode& rg) {
                    if (rg.first.workbook || rg.first.col_only) return;
                    if (rg.first.sheet && !ci_equal(*rg.first.sheet, sheet.name)) return;
                    int c1 = rg.first.col, r1 = rg.first.row, c2 = rg.second.col, r2 = rg.second.row;
                    auto flag = [&](int col, int row) {
                        if (col < 1 || row < 1 || col > kMaxCol || row > kMaxRow) return;
                        if (col == at.col && row == at.row) return;  // the aggregating cell itself
                        if (!sheet.cell_at(col, row)) return;
                        out.push_back(detail::at_cell(
                            4, Severity::Warn, at,
                            "aggregation over " + column_letters(c1) + std::to_string(r1) + ":" +
                                column_letters(c2) + std::to_string(r2) + " omits adjacent non-blank cell " +
                                column_letters(col) + std::to_string(row),
                            column_letters(col) + std::to_string(row), ""));
                    };
                    if (c1 == c2 && r2 > r1) {  // vertical vector
                        flag(c1, r2 + 1);
                        flag(c1, r1 - 1);
                    } else if (r1 == r2 && c2 > c1) {  // horizontal vector
                        flag(c2 + 1, r1);
                        flag(c1 - 1, r1);
                    }
                }
            };
            Scan{sheet, at, out}.walk(cell.formula().ast);
        }
    }
    return out;
}

// ---- S5: lookups relying on the default match type --------------------------

inline std::vector<Finding> s5_lookup_default_match(const Workbook& wb) {
    std::vector<Finding> out;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walk {
            std::vector<Finding>& out;
            const CellAddress& at;
            void go(const AstPtr& a) {
                if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    bool lookup3 = (c->func == "VLOOKUP" || c->func == "HLOOKUP") && c->args.size() == 3;
                    bool match2 = c->func == "MATCH" && c->args.size() == 2;
                    if (lookup3 || match2)
                        out.push_back(detail::at_cell(
                            5, Severity::Warn, at,
                            c->func + " without its optional match-type argument defaults to approximate "
                                      "matching; state the argument explicitly",
                            c->func, ""));
                    for (const auto& arg : c->args) go(arg);
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    go(b->lhs);
                    go(b->rhs);
                }
            }
        };
        Walk{out, at}.go(fm.ast);
    });
    return out;
}

// ---- S6: unguarded division --------------------------------------------------

inline std::vector<Finding> s6_unguarded_division(const Workbook& wb) {
    std::vector<Finding> out;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walk {
            std::vector<Finding>& out;
            const CellAddress& at;
            std::vector<AstPtr> guards;  // denominators tested against zero
            int iferror_depth = 0;

            static bool is_zero(const AstPtr& a) {
                auto* n = ast_as<Ast::NumberLit>(a);
                return n && n->value == 0;
            }
            static AstPtr guard_of(const AstPtr& cond) {
                auto* b = ast_as<Ast::Binary>(cond);
                if (!b || (b->op != BinOp::Eq && b->op != BinOp::Ne)) return nullptr;
                if (is_zero(b->rhs)) return b->lhs;
                if (is_zero(b->lhs)) return b->rhs;
                return nullptr;
            }
            static bool is_ref_like(const AstPtr& a) {
                return ast_as<Ast::RefNode>(a) || ast_as<Ast::RangeNode>(a) || ast_as<Ast::NameNode>(a);
            }
            bool guarded(const AstPtr& den) const {
                if (iferror_depth > 0) return true;
                for (const auto& g : guards)
                    if (ast_equal(g, den)) return true;
                return false;
            }
            void go(const AstPtr& a) {
                if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    if (c->func == "IF" && !c->args.empty()) {
                        AstPtr g = guard_of(c->args[0]);
                        go(c->args[0]);
                        if (g) guards.push_back(g);
                        for (size_t i = 1; i < c->args.size(); ++i) go(c->args[i]);
                        if (g) guards.pop_back();
                        return;
                    }
                    if (c->func == "IFERROR" && !c->args.empty()) {
                        ++iferror_depth;
                        go(c->args[0]);
                        --iferror_depth;
                        for (size_t i = 1; i < c->args.size(); ++i) go(c->args[i]);
                        return;
                    }
                    for (const auto& arg : c->args) go(arg);
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    if (b->op == BinOp::Div && is_ref_like(strip_group(b->rhs)) && !guarded(strip_group(b->rhs))) {
                        out.push_back(detail::at_cell(
                            6, Severity::Info, at,
                            "division by " + serialize_expr(strip_group(b->rhs)) +
                                " is unguarded and can produce #DIV/0!",
                            serialize_expr(strip_group(b->rhs)), ""));
                    }
                    go(b->lhs);
                    go(b->rhs);
                }
            }
            static AstPtr strip_group(const AstPtr& a) {
                if (!a->grouped) return a;
                auto b = std::make_shared<Ast>(*a);
                b->grouped = false;
                return b;
            }
        };
        Walk w{out, at, {}, 0};
        w.go(fm.ast);
    });
    return out;
}

// ---- S7: external links by address -------------------------------------------

inline std::vector<Finding> s7_external_address_link(const Workbook& wb) {
    std::vector<Finding> out;
    std::map<std::string, std::vector<std::pair<CellAddress, std::string>>, CiLess> by_book;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walk {
            std::vector<Finding>& out;
            decltype(by_book)& books;
            const CellAddress& at;
            void go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    if (r->ref.workbook) flag_address(ref_a1(r->ref), *r->ref.workbook);
                } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
                    if (rg->first.workbook)
                        flag_address(ref_a1(rg->first) + ":" + ref_a1_local(rg->second), *rg->first.workbook);
                } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
                    if (nm->workbook) books[*nm->workbook].push_back({at, nm->name});
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    go(b->lhs);
                    go(b->rhs);
                } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    for (const auto& arg : c->args) go(arg);
                }
            }
            void flag_address(const std::string& text, const std::string& book) {
                books[book].push_back({at, text});
                out.push_back(detail::at_cell(
                    7, Severity::Warn, at,
                    "external data pulled by cell address " + text +
                        "; refer to a range name in the source workbook instead",
                    text, ""));
            }
        };
        Walk{out, by_book, at}.go(fm.ast);
    });
    for (const auto& [book, sites] : by_book) {
        std::string listing;
        for (size_t i = 0; i < sites.size(); ++i) {
            if (i) listing += ", ";
            listing += sites[i].first.full() + " -> " + sites[i].second;
        }
        out.push_back(detail::at_cell(7, Severity::Info, sites.front().first,
                                      "workbook links to [" + book + "] from " + std::to_string(sites.size()) +
                                          " site(s): " + listing,
                                      book, ""));
    }
    return out;
}

// ---- S8: repeated lookups over one table --------------------------------------

inline std::vector<Finding> s8_repeated_lookup(const Workbook& wb, const LintConfig& cfg) {
    (void)cfg;
    std::vector<Finding> out;
    for (const auto& sheet : wb.sheets) {
        struct Site {
            CellAddress at;
            int col_index;
        };
        std::map<std::string, std::vector<Site>> groups;
        for (const auto& [pos, cell] : sheet.cells) {
            if (!cell.is_formula()) continue;
            CellAddress at{sheet.name, pos.second, pos.first};
            struct Walk {
                std::map<std::string, std::vector<Site>>& groups;
                const CellAddress& at;
                void go(const AstPtr& a) {
                    if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                        if ((c->func == "VLOOKUP" || c->func == "HLOOKUP") && c->args.size() >= 3) {
                            auto* idx = ast_as<Ast::NumberLit>(c->args[2]);
                            if (idx && idx->value == std::floor(idx->value)) {
                                std::string key = c->func + "|" + serialize_expr(c->args[0]) + "|" +
                                                  serialize_expr(c->args[1]);
                                if (c->args.size() == 4) key += "|" + serialize_expr(c->args[3]);
                                groups[key].push_back({at, int(idx->value)});
                            }
                        }
                        for (const auto& arg : c->args) go(arg);
                    } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                        go(u->operand);
                    } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                        go(b->lhs);
                        go(b->rhs);
                    }
                }
            };
            Walk{groups, at}.go(cell.formula().ast);
        }
        for (const auto& [key, sites] : groups) {
            // one representative per column index; same-column duplicates are S1's
            std::map<int, CellAddress> by_col;
            for (const auto& s : sites)
                if (!by_col.count(s.col_index)) by_col[s.col_index] = s.at;
            if (by_col.size() < 2) continue;
            std::vector<CellAddress> cells;
            std::string cols;
            for (const auto& [c, a] : by_col) {
                cells.push_back(a);
                if (!cols.empty()) cols += ",";
                cols += std::to_string(c);
            }
            std::sort(cells.begin(), cells.end());
            out.push_back(detail::region_finding(
                8, Severity::Info, cells,
                std::to_string(by_col.size()) + " lookups on the same key and table (columns " + cols +
                    "); one MATCH plus INDEX per column is cheaper and makes the row explicit (" +
                    detail::join_addresses(cells) + ")",
                key, "R6"));
        }
    }
    return out;
}

// ---- S9: referenced blank cells ------------------------------------------------

inline std::vector<Finding> s9_referenced_blank(const Workbook& wb) {
    std::set<CellAddress> blanks;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walk {
            const Workbook& wb;
            const CellAddress& at;
            std::set<CellAddress>& blanks;
            void add_rect(const Ref& first, const Ref& second) {
                if (first.workbook) return;
                std::string sheet = first.sheet.value_or(at.sheet);
                const Sheet* sh = wb.find_sheet(sheet);
                if (!sh) return;
                int r1 = first.row, r2 = second.row;
                if (first.col_only || second.col_only) {
                    auto [mc, mr] = sh->used_extent();
                    (void)mc;
                    r1 = 1;
                    r2 = std::max(1, mr);
                }
                int found = 0;
                for (int r = r1; r <= r2 && found < 20; ++r)
                    for (int c = first.col; c <= second.col && found < 20; ++c)
                        if (!sh->cell_at(c, r)) {
                            blanks.insert(CellAddress{sh->name, c, r});
                            ++found;  // per-range cap, remainder elided
                        }
            }
            void go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    add_rect(r->ref, r->ref);
                } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
                    add_rect(rg->first, rg->second);
                } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
                    if (!nm->workbook)
                        if (const DefinedName* dn = wb.find_name(nm->name))
                            add_rect(dn->target_first, dn->target_second.value_or(dn->target_first));
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    go(b->lhs);
                    go(b->rhs);
                } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    for (const auto& arg : c->args) go(arg);
                }
            }
        };
        Walk{wb, at, blanks}.go(fm.ast);
    });
    std::vector<Finding> out;
    for (const auto& a : blanks)
        out.push_back(detail::at_cell(9, Severity::Info, a,
                                      "blank cell is referenced by formulas; enter 0 or =NA() so missing and "
                                      "empty data stay distinguishable",
                                      "", ""));
    return out;
}

// ---- S10: data envy --------------------------------------------------------------

inline std::vector<Finding> s10_data_envy(const Workbook& wb, const LintConfig& cfg) {
    std::vector<Finding> out;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        std::map<std::string, std::set<std::string>, CiLess> per_sheet;  // sheet -> distinct ref keys
        struct Walk {
            const Workbook& wb;
            const CellAddress& at;
            decltype(per_sheet)& sheets;
            void add(const std::optional<std::string>& book, const std::optional<std::string>& sheet,
                     const std::string& key) {
                if (book) return;  // external books are S7's concern
                std::string s = sheet.value_or(at.sheet);
                if (!wb.find_sheet(s)) return;
                sheets[wb.find_sheet(s)->name].insert(key);
            }
            void go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    add(r->ref.workbook, r->ref.sheet, ref_a1_local(r->ref));
                } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
                    add(rg->first.workbook, rg->first.sheet,
                        ref_a1_local(rg->first) + ":" + ref_a1_local(rg->second));
                } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
                    if (!nm->workbook)
                        if (const DefinedName* dn = wb.find_name(nm->name))
                            add(std::nullopt, dn->target_first.sheet, "name:" + detail::ci_fold(nm->name));
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    go(b->lhs);
                    go(b->rhs);
                } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    for (const auto& arg : c->args) go(arg);
                }
            }
        };
        Walk{wb, at, per_sheet}.go(fm.ast);
        int local = 0;
        auto lit = per_sheet.find(at.sheet);
        if (lit != per_sheet.end()) local = int(lit->second.size());
        for (const auto& [sheet, refs] : per_sheet) {
            if (ci_equal(sheet, at.sheet)) continue;
            int n = int(refs.size());
            if (n >= cfg.envy_min_refs && local < n)
                out.push_back(detail::at_cell(
                    10, Severity::Info, at,
                    "formula pulls " + std::to_string(n) + " distinct values from sheet '" + sheet + "' but only " +
                        std::to_string(local) + " local; the calculation wants to live on '" + sheet + "'",
                    sheet, ""));
        }
    });
    return out;
}

// ---- S11: data clumps ---------------------------------------------------------------

inline std::vector<Finding> s11_data_clump(const Workbook& wb, const LintConfig& cfg) {
    // per formula: the set of individually referenced single cells, per sheet
    struct RefSet {
        CellAddress formula_at;
        std::map<std::string, std::set<CellAddress>, CiLess> per_sheet;
    };
    std::vector<RefSet> sets;
    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        RefSet rs;
        rs.formula_at = at;
        struct Walk {
            const Workbook& wb;
            const CellAddress& at;
            RefSet& rs;
            void go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    if (r->ref.workbook) return;
                    std::string sheet = r->ref.sheet.value_or(at.sheet);
                    const Sheet* sh = wb.find_sheet(sheet);
                    if (sh) rs.per_sheet[sh->name].insert(CellAddress{sh->name, r->ref.col, r->ref.row});
                } else if (auto* u = std::get_if<Ast::Unary>(&a->node)) {
                    go(u->operand);
                } else if (auto* b = std::get_if<Ast::Binary>(&a->node)) {
                    go(b->lhs);
                    go(b->rhs);
                } else if (auto* c = std::get_if<Ast::Call>(&a->node)) {
                    for (const auto& arg : c->args) go(arg);
                }
            }
        };
        Walk{wb, at, rs}.go(fm.ast);
        if (!rs.per_sheet.empty()) sets.push_back(std::move(rs));
    });

    auto covered_by_name = [&](const std::vector<CellAddress>& cells) {
        for (const auto& dn : wb.names) {
            if (!dn.target_second) continue;
            const Ref& a = dn.target_first;
            const Ref& b = *dn.target_second;
            bool all = true;
            for (const auto& c : cells) {
                if (!ci_equal(c.sheet, a.sheet.value_or(""))) { all = false; break; }
                if (c.col < a.col || c.col > b.col || c.row < a.row || c.row > b.row) { all = false; break; }
            }
            if (all) return true;
        }
        return false;
    };

    std::map<std::vector<CellAddress>, int> candidates;  // clump -> support
    for (size_t i = 0; i < sets.size(); ++i)
        for (size_t j = i + 1; j < sets.size(); ++j)
            for (const auto& [sheet, cellsA] : sets[i].per_sheet) {
                auto it = sets[j].per_sheet.find(sheet);
                if (it == sets[j].per_sheet.end()) continue;
                std::vector<CellAddress> inter;
                std::set_intersection(cellsA.begin(), cellsA.end(), it->second.begin(), it->second.end(),
                                      std::back_inserter(inter));
                if (int(inter.size()) < cfg.clump_min_size) continue;
                if (candidates.count(inter)) continue;
                int support = 0;
                for (const auto& rs : sets) {
                    auto sit = rs.per_sheet.find(sheet);
                    if (sit == rs.per_sheet.end()) continue;
                    if (std::includes(sit->second.begin(), sit->second.end(), inter.begin(), inter.end())) ++support;
                }
                if (support >= cfg.clump_min_uses) candidates[inter] = support;
            }

    std::vector<Finding> out;
    for (const auto& [cells, support] : candidates) {
        bool maximal = true;
        for (const auto& [other, os] : candidates) {
            (void)os;
            if (other.size() > cells.size() &&
                std::includes(other.begin(), other.end(), cells.begin(), cells.end())) {
                maximal = false;
                break;
            }
        }
        if (!maximal || covered_by_name(cells)) continue;
        out.push_back(detail::region_finding(
            11, Severity::Info, cells,
            "cells " + detail::join_addresses(cells) + " travel together through " + std::to_string(support) +
                " formulas; give the group a defined range name",
            detail::join_addresses(cells), ""));
    }
    return out;
}

// ---- dispatcher -----------------------------------------------------------------------

inline std::vector<Finding> detect_all(const Workbook& wb, const LintConfig& cfg = {}) {
    std::vector<Finding> out;
    auto add = [&](std::vector<Finding> v) {
        out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    };
    if (cfg.rules_enabled.count(1)) add(s1_duplicated_expression(wb, cfg));
    if (cfg.rules_enabled.count(2)) add(s2_overlong_formula(wb, cfg));
    if (cfg.rules_enabled.count(3)) add(s3_magic_number(wb, cfg));
    if (cfg.rules_enabled.count(4)) add(s4_irregular_region(wb, cfg));
    if (cfg.rules_enabled.count(5)) add(s5_lookup_default_match(wb));
    if (cfg.rules_enabled.count(6)) add(s6_unguarded_division(wb));
    if (cfg.rules_enabled.count(7)) add(s7_external_address_link(wb));
    if (cfg.rules_enabled.count(8)) add(s8_repeated_lookup(wb, cfg));
    if (cfg.rules_enabled.count(9)) add(s9_referenced_blank(wb));
    if (cfg.rules_enabled.count(10)) add(s10_data_envy(wb, cfg));
    if (cfg.rules_enabled.count(11)) add(s11_data_clump(wb, cfg));
    std::sort(out.begin(), out.end(), detail::finding_less);
    // a repeated expression can hit the same rule several times in one cell
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Finding& a, const Finding& b) {
                              return a.rule == b.rule && a.severity == b.severity && a.sheet == b.sheet &&
                                     a.col1 == b.col1 && a.row1 == b.row1 && a.col2 == b.col2 && a.row2 == b.row2 &&
                                     a.message == b.message && a.evidence == b.evidence;
                          }),
              out.end());
    return out;
}

}  // namespace gridbook
