#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridbook/ast.hpp"
#include "gridbook/parser.hpp"
#include "gridbook/printer.hpp"
#include "gridbook/value.hpp"

namespace gridbook {

struct Formula {
    std::string text;  // source, beginning with '='
    AstPtr ast;
};

struct Cell {
    std::variant<Value, Formula> content;

    bool is_formula() const { return std::holds_alternative<Formula>(content); }
    const Formula& formula() const { return std::get<Formula>(content); }
    const Value& literal() const { return std::get<Value>(content); }

    static Cell of_value(Value v) { return Cell{std::move(v)}; }
    static Cell of_formula(std::string text) {
        AstPtr ast = parse(text);
        return Cell{Formula{std::move(text), std::move(ast)}};
    }
};

struct DefinedName {
    std::string name;
    Ref target_first;                 // always carries a sheet
    std::optional<Ref> target_second; // set when the target is a range

    bool is_range() const { return target_second.has_value(); }
};

struct Sheet {
    std::string name;
    std::map<std::pair<int, int>, Cell> cells;  // key (row, col), sparse

    const Cell* cell_at(int col, int row) const {
        auto it = cells.find({row, col});
        return it == cells.end() ? nullptr : &it->second;
    }
    void set(int col, int row, Cell c) { cells[{row, col}] = std::move(c); }
    void erase(int col, int row) { cells.erase({row, col}); }

    // (max col, max row) over stored cells; (0,0) when empty
    std::pair<int, int> used_extent() const {
        int mc = 0, mr = 0;
        for (const auto& [key, cell] : cells) {
            (void)cell;
            mr = std::max(mr, key.first);
            mc = std::max(mc, key.second);
        }
        return {mc, mr};
    }
};

struct Workbook {
    std::vector<Sheet> sheets;
    std::vector<DefinedName> names;
    std::map<std::string, Workbook, CiLess> links;  // external book name -> loaded book

    const Sheet* find_sheet(const std::string& name) const {
        for (const auto& s : sheets)
            if (ci_equal(s.name, name)) return &s;
        return nullptr;
    }
    Sheet* find_sheet(const std::string& name) {
        for (auto& s : sheets)
            if (ci_equal(s.name, name)) return &s;
        return nullptr;
    }
    Sheet& sheet_or_create(const std::string& name) {
        if (Sheet* s = find_sheet(name)) return *s;
        sheets.push_back(Sheet{name, {}});
        return sheets.back();
    }

    const DefinedName* find_name(const std::string& name) const {
        for (const auto& n : names)
            if (ci_equal(n.name, name)) return &n;
        return nullptr;
    }

    const Cell* cell_at(const CellAddress& a) const {
        const Sheet* s = find_sheet(a.sheet);
        return s ? s->cell_at(a.col, a.row) : nullptr;
    }
    void set_cell(const CellAddress& a, Cell c) { sheet_or_create(a.sheet).set(a.col, a.row, std::move(c)); }
};

// Ignores external link bindings: those are runtime attachments, not content.
inline bool workbook_equal(const Workbook& a, const Workbook& b) {
    if (a.sheets.size() != b.sheets.size() || a.names.size() != b.names.size()) return false;
    for (size_t i = 0; i < a.sheets.size(); ++i) {
        const Sheet& x = a.sheets[i];
        const Sheet& y = b.sheets[i];
        if (x.name != y.name || x.cells.size() != y.cells.size()) return false;
        auto it = y.cells.begin();
        for (const auto& [key, cell] : x.cells) {
            if (it->first != key) return false;
            const Cell& c2 = it->second;
            if (cell.is_formula() != c2.is_formula()) return false;
            if (cell.is_formula()) {
                if (cell.formula().text != c2.formula().text) return false;
                if (!ast_equal(cell.formula().ast, c2.formula().ast)) return false;
            } else if (cell.literal() != c2.literal()) {
                return false;
            }
            ++it;
        }
    }
    for (size_t i = 0; i < a.names.size(); ++i) {
        const DefinedName& x = a.names[i];
        const DefinedName& y = b.names[i];
        if (x.name != y.name || x.target_first != y.target_first) return false;
        if (x.target_second.has_value() != y.target_second.has_value()) return false;
        if (x.target_second && *x.target_second != *y.target_second) return false;
    }
    return true;
}

struct ResolveResult {
    std::vector<CellAddress> addrs;       // row-major
    std::optional<ErrorKind> error;       // REF (unknown sheet/book) or NAME (unknown name)
    bool external_unresolved = false;     // workbook name with no binding
};

namespace detail {

inline ResolveResult resolve_pair(const Workbook& wb, const std::string& default_sheet, const Ref& first,
                                  const std::optional<Ref>& second) {
    ResolveResult out;
    const Workbook* book = &wb;
    if (first.workbook) {
        auto it = wb.links.find(*first.workbook);
        if (it == wb.links.end()) {
            out.error = ErrorKind::REF;
            out.external_unresolved = true;
            return out;
        }
        book = &it->second;
    }
    std::string sheet = first.sheet.value_or(default_sheet);
    const Sheet* sh = book->find_sheet(sheet);
    if (!sh) {
        out.error = ErrorKind::REF;
        return out;
    }
    int c1 = first.col, r1 = first.row;
    int c2 = second ? second->col : c1;
    int r2 = second ? second->row : r1;
    if (first.col_only || (second && second->col_only)) {  // whole-column: clip to used extent
        auto [mc, mr] = sh->used_extent();
        (void)mc;
        r1 = 1;
        r2 = std::max(1, mr);
    }
    for (int r = r1; r <= r2; ++r)
        for (int c = c1; c <= c2; ++c) out.addrs.push_back(CellAddress{sh->name, c, r});
    return out;
}

}  // namespace detail

// Resolve a single reference against a context cell. NameRefs expand through
// the defined-name table; ranges enumerate row-major.
inline ResolveResult resolve(const Workbook& wb, const CellAddress& context, const Ref& ref) {
    return detail::resolve_pair(wb, context.sheet, ref, std::nullopt);
}

inline ResolveResult resolve_range(const Workbook& wb, const CellAddress& context, const Ref& first,
                                   const Ref& second) {
    return detail::resolve_pair(wb, context.sheet, first, second);
}

inline ResolveResult resolve_name(const Workbook& wb, const std::optional<std::string>& book_name,
                                  const std::string& name) {
    const Workbook* book = &wb;
    if (book_name) {
        auto it = wb.links.find(*book_name);
        if (it == wb.links.end()) {
            ResolveResult out;
            out.error = ErrorKind::REF;
            out.external_unresolved = true;
            return out;
        }
        book = &it->second;
    }
    const DefinedName* dn = book->find_name(name);
    if (!dn) {
        ResolveResult out;
        out.error = ErrorKind::NAME;
        return out;
    }
    return detail::resolve_pair(*book, dn->target_first.sheet.value_or(""), dn->target_first, dn->target_second);
}

}  // namespace gridbook
