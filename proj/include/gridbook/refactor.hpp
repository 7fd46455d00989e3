#pragma once

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridbook/eval.hpp"
#include "gridbook/normalize.hpp"
#include "gridbook/smells.hpp"
#include "gridbook/workbook.hpp"

namespace gridbook {

struct RefactorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numbers are compared with relative tolerance; below 1 it degrades to an
// absolute bound so near-zero results do not fail on representation noise.
inline constexpr double kPreserveTol = 1e-12;

inline bool values_match(const Value& a, const Value& b) {
    if (a.is_number() && b.is_number()) {
        double x = a.as_number(), y = b.as_number();
        if (x == y) return true;
        return std::fabs(x - y) <= kPreserveTol * std::max(1.0, std::fabs(x));
    }
    if (a.is_text() && b.is_text()) return a.as_text() == b.as_text();
    if (a.is_bool() && b.is_bool()) return a.as_bool() == b.as_bool();
    if (a.is_error() && b.is_error()) return a.as_error() == b.as_error();
    return a.is_blank() && b.is_blank();
}

struct Edit {
    enum Kind { SetFormula, SetLiteral, DefineName } kind;
    CellAddress addr;      // unused for DefineName
    std::string text;      // new content: formula text, literal text, or "name = target"
    std::string previous;  // prior content for display; empty when the cell was blank
};

struct ValueDiff {
    CellAddress addr;
    Value before;
    Value after;
};

enum class Verdict { Preserved, Changed, NotVerified };

inline const char* verdict_text(Verdict v) {
    switch (v) {
        case Verdict::Preserved: return "preserved";
        case Verdict::Changed: return "changed";
        case Verdict::NotVerified: return "not_verified";
    }
    return "not_verified";
}

struct PreservationReport {
    Verdict verdict = Verdict::NotVerified;
    std::vector<ValueDiff> diffs;
};

struct RefactorPlan {
    std::string rule;
    std::vector<Edit> edits;
    PreservationReport verification;
    bool committed = false;  // false when verification failed and force was off
    std::string note;
};

inline PreservationReport verify_preservation(const Workbook& before, const Workbook& after,
                                              const std::set<CellAddress>& helpers = {}) {
    PreservationReport rep;
    ValueGrid gb = evaluate(before);
    ValueGrid ga = evaluate(after);
    for (const auto& [addr, val] : gb) {
        if (helpers.count(addr)) continue;
        auto it = ga.find(addr);
        Value now = it == ga.end() ? Value::blank() : it->second;
        if (!values_match(val, now)) rep.diffs.push_back({addr, val, now});
    }
    rep.verdict = rep.diffs.empty() ? Verdict::Preserved : Verdict::Changed;
    return rep;
}

namespace detail {

inline std::string cell_display(const Workbook& wb, const CellAddress& a) {
    const Cell* c = wb.cell_at(a);
    if (!c) return "";
    return c->is_formula() ? c->formula().text : to_display(c->literal());
}

inline void require_blank(const Workbook& wb, const CellAddress& a, const char* what) {
    if (wb.cell_at(a)) throw RefactorError(std::string(what) + " cell " + a.full() + " is not blank");
}

inline Edit set_formula_edit(Workbook& wb, const CellAddress& a, const std::string& text) {
    Edit e{Edit::SetFormula, a, text, cell_display(wb, a)};
    wb.set_cell(a, Cell::of_formula(text));
    return e;
}

// A subtree moved from `from` to `to` keeps its meaning only on axes where the
// position did not change; other relative axes get pinned absolute.
inline AstPtr absolutize_for_move(const AstPtr& ast, const CellAddress& from, const CellAddress& to) {
    return map_refs(ast, [&](const Ref& r) {
        Ref out = r;
        if (out.workbook) return out;
        if (!out.col_abs && to.col != from.col) out.col_abs = true;
        if (!out.row_abs && !out.col_only && to.row != from.row) out.row_abs = true;
        return out;
    });
}

inline AstPtr plain_ref(const CellAddress& a, const std::string& context_sheet) {
    Ref r;
    if (!ci_equal(a.sheet, context_sheet)) r.sheet = a.sheet;
    r.col = a.col;
    r.row = a.row;
    return make_ast(Ast::RefNode{r});
}

// replace every occurrence of `needle` (grouping-insensitive) in `hay`
inline AstPtr replace_subtree(const AstPtr& hay, const AstPtr& needle, const AstPtr& replacement, int& hits) {
    auto bare = [](const AstPtr& a) -> AstPtr {
        if (!a->grouped) return a;
        auto c = std::make_shared<Ast>(*a);
        c->grouped = false;
        return c;
    };
    if (ast_equal(bare(hay), bare(needle))) {
        ++hits;
        return replacement;
    }
    auto b = std::make_shared<Ast>(*hay);
    if (auto* u = std::get_if<Ast::Unary>(&b->node)) {
        u->operand = replace_subtree(u->operand, needle, replacement, hits);
    } else if (auto* bi = std::get_if<Ast::Binary>(&b->node)) {
        bi->lhs = replace_subtree(bi->lhs, needle, replacement, hits);
        bi->rhs = replace_subtree(bi->rhs, needle, replacement, hits);
    } else if (auto* c = std::get_if<Ast::Call>(&b->node)) {
        for (auto& arg : c->args) arg = replace_subtree(arg, needle, replacement, hits);
    }
    return b;
}

inline const Formula& formula_at(const Workbook& wb, const CellAddress& at) {
    const Cell* c = wb.cell_at(at);
    if (!c || !c->is_formula()) throw RefactorError("no formula at " + at.full());
    return c->formula();
}

inline void finalize(RefactorPlan& plan, const Workbook& original, Workbook& result,
                     const std::set<CellAddress>& helpers, bool force) {
    plan.verification = verify_preservation(original, result, helpers);
    plan.committed = plan.verification.verdict == Verdict::Preserved || force;
    if (!plan.committed) result = original;
}

}  // namespace detail

// ---- R1: extract a repeated expression into a helper cell --------------------

inline std::pair<Workbook, RefactorPlan> r1_extract_expression(const Workbook& wb, const CellAddress& at,
                                                               const std::string& subtree_text,
                                                               const CellAddress& helper, bool swap_layout = false,
                                                               bool force = false) {
    RefactorPlan plan;
    plan.rule = "R1";
    const Formula& fm = detail::formula_at(wb, at);
    detail::require_blank(wb, helper, "helper");

    AstPtr needle = parse(subtree_text[0] == '=' ? subtree_text : "=" + subtree_text);
    int hits = 0;
    // the rewritten formula refers to wherever the extracted expression lives
    const CellAddress& expr_home = swap_layout ? at : helper;
    AstPtr rewritten = detail::replace_subtree(fm.ast, needle, detail::plain_ref(expr_home, at.sheet), hits);
    if (hits == 0) throw RefactorError("expression not found in formula at " + at.full());

    AstPtr moved = swap_layout ? needle : detail::absolutize_for_move(needle, at, helper);
    Workbook out = wb;
    if (swap_layout) {
        // the target cell keeps the expression; the rewritten formula moves aside
        plan.edits.push_back(detail::set_formula_edit(out, at, serialize(moved)));
        plan.edits.push_back(detail::set_formula_edit(out, helper, serialize(rewritten)));
        plan.verification = verify_preservation(wb, out, {at});
        // the moved formula must still produce the old target value
        ValueGrid gb = evaluate(wb), ga = evaluate(out);
        Value was = gb.count(at) ? gb[at] : Value::blank();
        Value now = ga.count(helper) ? ga[helper] : Value::blank();
        if (!values_match(was, now)) {
            plan.verification.verdict = Verdict::Changed;
            plan.verification.diffs.push_back({helper, was, now});
        }
        plan.committed = plan.verification.verdict == Verdict::Preserved || force;
        if (!plan.committed) out = wb;
    } else {
        plan.edits.push_back(detail::set_formula_edit(out, helper, serialize(moved)));
        plan.edits.push_back(detail::set_formula_edit(out, at, serialize(rewritten)));
        detail::finalize(plan, wb, out, {helper}, force);
    }
    return {out, plan};
}

// ---- R2: collapse IF(ISNA(X),alt,X) into IFERROR(X,alt) ----------------------

inline std::pair<Workbook, RefactorPlan> r2_iferror_rewrite(const Workbook& wb, const CellAddress& at,
                                                            bool force = false) {
    RefactorPlan plan;
    plan.rule = "R2";
    const Formula& fm = detail::formula_at(wb, at);
    auto* iff = ast_as<Ast::Call>(fm.ast);
    if (!iff || iff->func != "IF" || iff->args.size() != 3) throw RefactorError("pattern mismatch");
    auto* test = ast_as<Ast::Call>(iff->args[0]);
    if (!test || (test->func != "ISNA" && test->func != "ISERROR") || test->args.size() != 1)
        throw RefactorError("pattern mismatch");
    auto bare = [](AstPtr a) -> AstPtr {
        if (!a->grouped) return a;
        auto c = std::make_shared<Ast>(*a);
        c->grouped = false;
        return c;
    };
    if (!ast_equal(bare(test->args[0]), bare(iff->args[2]))) throw RefactorError("pattern mismatch");

    AstPtr replacement = make_ast(Ast::Call{"IFERROR", {iff->args[2], iff->args[1]}});
    Workbook out = wb;
    plan.edits.push_back(detail::set_formula_edit(out, at, serialize(replacement)));
    if (test->func == "ISNA")
        plan.note = "ISNA only traps #N/A; IFERROR traps every error, so verification must stay clean";
    detail::finalize(plan, wb, out, {}, force);
    return {out, plan};
}

// ---- R3: move a magic number into its own (named) cell ------------------------

inline std::pair<Workbook, RefactorPlan> r3_extract_magic_number(const Workbook& wb, const CellAddress& at,
                                                                 double literal, const CellAddress& dest,
                                                                 const std::string& name = "",
                                                                 bool all_sheet = false, bool force = false,
                                                                 const LintConfig& cfg = {}) {
    RefactorPlan plan;
    plan.rule = "R3";
    if (cfg.magic_whitelist.count(literal)) throw RefactorError("not a magic number: " + format_number(literal));
    detail::require_blank(wb, dest, "destination");
    if (!name.empty()) {
        if (!is_valid_name(name)) throw RefactorError("invalid name " + name);
        if (const DefinedName* dn = wb.find_name(name)) {
            bool same = dn->target_first.sheet && ci_equal(*dn->target_first.sheet, dest.sheet) &&
                        dn->target_first.col == dest.col && dn->target_first.row == dest.row && !dn->target_second;
            if (!same) throw RefactorError("name " + name + " already defined with a different target");
        }
    }

    AstPtr replacement;
    if (!name.empty()) {
        replacement = make_ast(Ast::NameNode{std::nullopt, name});
    } else {
        Ref r;
        if (!ci_equal(dest.sheet, at.sheet)) r.sheet = dest.sheet;
        r.col = dest.col;
        r.row = dest.row;
        r.col_abs = r.row_abs = true;
        replacement = make_ast(Ast::RefNode{r});
    }
    AstPtr needle = make_ast(Ast::NumberLit{literal});

    Workbook out = wb;
    plan.edits.push_back(Edit{Edit::SetLiteral, dest, format_number(literal), ""});
    out.set_cell(dest, Cell::of_value(Value::number(literal)));
    if (!name.empty() && !out.find_name(name)) {
        Ref target;
        target.sheet = dest.sheet;
        target.col = dest.col;
        target.row = dest.row;
        target.col_abs = target.row_abs = true;
        out.names.push_back(DefinedName{name, target, std::nullopt});
        plan.edits.push_back(Edit{Edit::DefineName, dest, name + " = " + dest.sheet + "!" + ref_a1_local(target), ""});
    }

    int total = 0;
    const Sheet* sh = wb.find_sheet(at.sheet);
    if (!sh) throw RefactorError("no sheet " + at.sheet);
    for (const auto& [pos, cell] : sh->cells) {
        if (!cell.is_formula()) continue;
        CellAddress here{sh->name, pos.second, pos.first};
        if (!all_sheet && !(here == at)) continue;
        int hits = 0;
        AstPtr rewritten = detail::replace_subtree(cell.formula().ast, needle, replacement, hits);
        if (hits == 0) continue;
        total += hits;
        plan.edits.push_back(detail::set_formula_edit(out, here, serialize(rewritten)));
    }
    if (total == 0) throw RefactorError("literal " + format_number(literal) + " not found");
    detail::finalize(plan, wb, out, {dest}, force);
    return {out, plan};
}

// ---- R4: replace address references with a defined name -----------------------

struct Region {
    std::string sheet;
    int col1 = 1, row1 = 1, col2 = 1, row2 = 1;
};

inline std::pair<Workbook, RefactorPlan> r4_apply_name(const Workbook& wb, const Region& region,
                                                       const std::string& target_text, const std::string& name,
                                                       bool force = false) {
    RefactorPlan plan;
    plan.rule = "R4";
    if (!is_valid_name(name)) throw RefactorError("invalid name " + name);

    // target like "S!$D$1"; the sheet part is required
    AstPtr parsed = parse("=" + target_text);
    auto* rn = ast_as<Ast::RefNode>(parsed);
    if (!rn || rn->ref.workbook || !rn->ref.sheet) throw RefactorError("target must be Sheet!Cell: " + target_text);
    CellAddress target{*rn->ref.sheet, rn->ref.col, rn->ref.row};

    Workbook out = wb;
    if (const DefinedName* dn = wb.find_name(name)) {
        bool same = dn->target_first.sheet && ci_equal(*dn->target_first.sheet, target.sheet) &&
                    dn->target_first.col == target.col && dn->target_first.row == target.row && !dn->target_second;
        if (!same) throw RefactorError("name target mismatch: " + name);
    } else {
        Ref t;
        t.sheet = target.sheet;
        t.col = target.col;
        t.row = target.row;
        t.col_abs = t.row_abs = true;
        out.names.push_back(DefinedName{name, t, std::nullopt});
        plan.edits.push_back(Edit{Edit::DefineName, target, name + " = " + target.sheet + "!" + ref_a1_local(t), ""});
    }

    const Sheet* sh = wb.find_sheet(region.sheet);
    if (!sh) throw RefactorError("no sheet " + region.sheet);
    AstPtr name_node = make_ast(Ast::NameNode{std::nullopt, name});
    for (const auto& [pos, cell] : sh->cells) {
        if (!cell.is_formula()) continue;
        if (pos.first < region.row1 || pos.first > region.row2 || pos.second < region.col1 ||
            pos.second > region.col2)
            continue;
        CellAddress here{sh->name, pos.second, pos.first};
        bool changed = false;
        // "ignore relative/absolute": any single-cell ref landing on the target qualifies
        struct Rewrite {
            const Workbook& wb;
            const CellAddress& here;
            const CellAddress& target;
            const AstPtr& name_node;
            bool* changed;
            AstPtr go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    if (!r->ref.workbook && !r->ref.col_only) {
                        std::string sheet = r->ref.sheet.value_or(here.sheet);
                        if (ci_equal(sheet, target.sheet) && r->ref.col == target.col && r->ref.row == target.row) {
                            *changed = true;
                            return name_node;
                        }
                    }
                    return a;
                }
                auto b = std::make_shared<Ast>(*a);
                if (auto* u = std::get_if<Ast::Unary>(&b->node)) {
                    u->operand = go(u->operand);
                } else if (auto* bi = std::get_if<Ast::Binary>(&b->node)) {
                    bi->lhs = go(bi->lhs);
                    bi->rhs = go(bi->rhs);
                } else if (auto* c = std::get_if<Ast::Call>(&b->node)) {
                    for (auto& arg : c->args) arg = go(arg);
                }
                return b;
            }
        };
        AstPtr rewritten = Rewrite{wb, here, target, name_node, &changed}.go(cell.formula().ast);
        if (changed) plan.edits.push_back(detail::set_formula_edit(out, here, serialize(rewritten)));
    }
    detail::finalize(plan, wb, out, {}, force);
    return {out, plan};
}

// ---- R5: refill a region from one master formula -------------------------------

inline std::pair<Workbook, RefactorPlan> r5_regularize_region(const Workbook& wb, const Region& region,
                                                              const CellAddress& master, bool force = false) {
    RefactorPlan plan;
    plan.rule = "R5";
    if (!ci_equal(master.sheet, region.sheet) || master.col < region.col1 || master.col > region.col2 ||
        master.row < region.row1 || master.row > region.row2)
        throw RefactorError("master " + master.full() + " is outside the region");
    const Formula& fm = detail::formula_at(wb, master);
    NormalizedAst norm = normalize(fm.ast, master);

    Workbook out = wb;
    for (int r = region.row1; r <= region.row2; ++r)
        for (int c = region.col1; c <= region.col2; ++c) {
            CellAddress here{master.sheet, c, r};
            if (here == master) continue;
            std::string text = serialize(denormalize(norm, here));
            const Cell* cur = wb.cell_at(here);
            if (cur && cur->is_formula() && cur->formula().text == text) continue;  // already regular
            plan.edits.push_back(detail::set_formula_edit(out, here, text));
        }
    detail::finalize(plan, wb, out, {}, force);
    return {out, plan};
}

// ---- R6: one MATCH feeding several INDEX lookups ---------------------------------

inline std::pair<Workbook, RefactorPlan> r6_lookup_to_match_index(const Workbook& wb,
                                                                  const std::vector<CellAddress>& sites,
                                                                  const CellAddress& helper, bool force = false) {
    RefactorPlan plan;
    plan.rule = "R6";
    if (sites.size() < 2) throw RefactorError("need >= 2 sites");
    detail::require_blank(wb, helper, "helper");

    struct SiteInfo {
        const Ast::Call* call;
        AstPtr value;
        Ast::RangeNode table;
        int col_index;
        bool vertical;
    };
    std::vector<SiteInfo> infos;
    std::string value_key, table_key;
    for (const auto& at : sites) {
        const Formula& fm = detail::formula_at(wb, at);
        auto* c = ast_as<Ast::Call>(fm.ast);
        if (!c || (c->func != "VLOOKUP" && c->func != "HLOOKUP") || c->args.size() != 4)
            throw RefactorError("site " + at.full() + " is not a 4-argument lookup");
        auto* exact = ast_as<Ast::BoolLit>(c->args[3]);
        if (!exact || exact->value)
            throw RefactorError("approximate-match lookup at " + at.full() + "; semantics would change");
        auto* tbl = ast_as<Ast::RangeNode>(c->args[1]);
        auto* idx = ast_as<Ast::NumberLit>(c->args[2]);
        if (!tbl || !idx || idx->value != std::floor(idx->value))
            throw RefactorError("site " + at.full() + " lacks a literal column index over a range");
        std::string vk = serialize_expr(c->args[0]);
        std::string tk = serialize_expr(c->args[1]);
        if (infos.empty()) {
            value_key = vk;
            table_key = tk;
        } else if (vk != value_key || tk != table_key) {
            throw RefactorError("sites do not share one lookup value and table");
        }
        infos.push_back({c, c->args[0], *tbl, int(idx->value), c->func == "VLOOKUP"});
    }

    const SiteInfo& first = infos.front();
    auto vector_of = [&](int index) {  // index-th column (or row) of the table
        Ast::RangeNode v = first.table;
        if (first.vertical) {
            v.first.col += index - 1;
            v.second.col = v.first.col;
            v.second.col_abs = v.first.col_abs;
        } else {
            v.first.row += index - 1;
            v.second.row = v.first.row;
            v.second.row_abs = v.first.row_abs;
        }
        return make_ast(v);
    };

    Workbook out = wb;
    AstPtr match_value = detail::absolutize_for_move(first.value, sites.front(), helper);
    AstPtr match = make_ast(Ast::Call{"MATCH", {match_value, vector_of(1), make_ast(Ast::NumberLit{0})}});
    plan.edits.push_back(detail::set_formula_edit(out, helper, serialize(match)));
    for (size_t i = 0; i < sites.size(); ++i) {
        AstPtr index =
            make_ast(Ast::Call{"INDEX", {vector_of(infos[i].col_index), detail::plain_ref(helper, sites[i].sheet)}});
        plan.edits.push_back(detail::set_formula_edit(out, sites[i], serialize(index)));
    }
    detail::finalize(plan, wb, out, {helper}, force);
    return {out, plan};
}

// ---- R7: split an addition chain across helper cells ------------------------------

inline std::pair<Workbook, RefactorPlan> r7_split_addition_chain(const Workbook& wb, const CellAddress& at,
                                                                 const CellAddress& helper_base,
                                                                 bool force = false) {
    RefactorPlan plan;
    plan.rule = "R7";
    const Formula& fm = detail::formula_at(wb, at);
    std::vector<AstPtr> terms = detail::addition_chain(fm.ast);
    if (terms.size() < 3) throw RefactorError("formula is not a chain of 3 or more added terms");

    Workbook out = wb;
    for (size_t i = 0; i < terms.size(); ++i) {
        CellAddress h{helper_base.sheet, helper_base.col + int(i), helper_base.row};
        detail::require_blank(wb, h, "helper");
        // A1 text pins the original targets, so the term computes the same value anywhere
        plan.edits.push_back(detail::set_formula_edit(out, h, serialize(terms[i])));
    }
    Ref a, b;
    if (!ci_equal(helper_base.sheet, at.sheet)) a.sheet = helper_base.sheet;
    a.col = helper_base.col;
    a.row = helper_base.row;
    b.col = helper_base.col + int(terms.size()) - 1;
    b.row = helper_base.row;
    AstPtr sum = make_ast(Ast::Call{"SUM", {make_ast(Ast::RangeNode{a, b})}});
    plan.edits.push_back(detail::set_formula_edit(out, at, serialize(sum)));

    std::set<CellAddress> helpers;
    for (size_t i = 0; i < terms.size(); ++i)
        helpers.insert(CellAddress{helper_base.sheet, helper_base.col + int(i), helper_base.row});
    detail::finalize(plan, wb, out, helpers, force);
    return {out, plan};
}

}  // namespace gridbook
