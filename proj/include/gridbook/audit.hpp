#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gridbook/normalize.hpp"
#include "gridbook/smells.hpp"
#include "gridbook/workbook.hpp"

namespace gridbook {

struct SheetSummary {
    std::string sheet;
    int cells = 0;
    int formulas = 0;
};

struct FormulaClass {
    std::string normalized;  // canonical offset form; copy-equivalent cells share it
    int count = 0;
    CellAddress representative;  // first cell in row-major order
    int col1 = 0, row1 = 0, col2 = 0, row2 = 0;

    std::string region() const {
        std::string a = column_letters(col1) + std::to_string(row1);
        if (col1 == col2 && row1 == row2) return a;
        return a + ":" + column_letters(col2) + std::to_string(row2);
    }
};

struct ExternalLinkSite {
    CellAddress site;
    std::string reference;  // e.g. [book.ext]Sheet1!$A$2
};

struct AuditReport {
    std::vector<SheetSummary> toc;
    std::vector<std::pair<std::string, std::vector<FormulaClass>>> distinct_formulas;  // per sheet, sheet order
    std::vector<std::string> names;                                                    // "NAME = Sheet!$A$1"
    std::vector<ExternalLinkSite> external_links;
    std::vector<std::pair<std::string, int>> blanks_referenced;  // per sheet, sheets with 0 omitted
};

inline std::string name_target_text(const DefinedName& dn) {
    std::string out = dn.target_first.sheet.value_or("") + "!" + ref_a1_local(dn.target_first);
    if (dn.target_second) out += ":" + ref_a1_local(*dn.target_second);
    return out;
}

inline AuditReport generate_audit(const Workbook& wb) {
    AuditReport rep;
    for (const auto& sheet : wb.sheets) {
        SheetSummary ss;
        ss.sheet = sheet.name;
        std::map<std::string, FormulaClass> classes;
        std::vector<std::string> order;
        for (const auto& [pos, cell] : sheet.cells) {
            ++ss.cells;
            if (!cell.is_formula()) continue;
            ++ss.formulas;
            CellAddress at{sheet.name, pos.second, pos.first};
            std::string key = normalize(cell.formula().ast, at).text();
            auto it = classes.find(key);
            if (it == classes.end()) {
                FormulaClass fc;
                fc.normalized = key;
                fc.count = 1;
                fc.representative = at;
                fc.col1 = fc.col2 = at.col;
                fc.row1 = fc.row2 = at.row;
                classes.emplace(key, fc);
                order.push_back(key);
            } else {
                FormulaClass& fc = it->second;
                ++fc.count;
                fc.col1 = std::min(fc.col1, at.col);
                fc.col2 = std::max(fc.col2, at.col);
                fc.row1 = std::min(fc.row1, at.row);
                fc.row2 = std::max(fc.row2, at.row);
            }
        }
        rep.toc.push_back(ss);
        std::vector<FormulaClass> list;
        for (const auto& key : order) list.push_back(classes[key]);
        rep.distinct_formulas.push_back({sheet.name, std::move(list)});
    }
    for (const auto& dn : wb.names) rep.names.push_back(dn.name + " = " + name_target_text(dn));
    std::sort(rep.names.begin(), rep.names.end(), [](const std::string& a, const std::string& b) {
        return ci_less(a, b);
    });

    detail::for_each_formula(wb, [&](const CellAddress& at, const Formula& fm) {
        struct Walk {
            std::vector<ExternalLinkSite>& out;
            const CellAddress& at;
            void go(const AstPtr& a) {
                if (auto* r = std::get_if<Ast::RefNode>(&a->node)) {
                    if (r->ref.workbook) out.push_back({at, ref_a1(r->ref)});
                } else if (auto* rg = std::get_if<Ast::RangeNode>(&a->node)) {
                    if (rg->first.workbook) out.push_back({at, ref_a1(rg->first) + ":" + ref_a1_local(rg->second)});
                } else if (auto* nm = std::get_if<Ast::NameNode>(&a->node)) {
                    if (nm->workbook) out.push_back({at, "[" + *nm->workbook + "]!" + nm->name});
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
        Walk{rep.external_links, at}.go(fm.ast);
    });
    std::sort(rep.external_links.begin(), rep.external_links.end(), [](const auto& a, const auto& b) {
        if (!(a.site == b.site)) return a.site < b.site;
        return a.reference < b.reference;
    });

    std::map<std::string, int> blanks;
    for (const auto& f : s9_referenced_blank(wb)) ++blanks[f.sheet];
    for (const auto& sheet : wb.sheets)
        if (blanks.count(sheet.name)) rep.blanks_referenced.push_back({sheet.name, blanks[sheet.name]});
    return rep;
}

inline std::string render_audit(const AuditReport& rep) {
    std::ostringstream out;
    out << "workbook audit\n";
    out << "note: cell formatting, styles and change history are outside this file format and are not checked\n";
    out << "\n[sheets]\n";
    for (const auto& s : rep.toc)
        out << s.sheet << ": " << s.cells << " cells, " << s.formulas << " formulas\n";
    out << "\n[distinct formulas]\n";
    for (const auto& [sheet, classes] : rep.distinct_formulas) {
        out << sheet << ": " << classes.size() << (classes.size() == 1 ? " class\n" : " classes\n");
        for (const auto& fc : classes)
            out << "  " << fc.normalized << "  x" << fc.count << "  first " << fc.representative.a1() << "  region "
                << fc.region() << "\n";
    }
    out << "\n[names]\n";
    for (const auto& n : rep.names) out << n << "\n";
    out << "\n[external links]\n";
    for (const auto& l : rep.external_links) out << l.site.full() << " -> " << l.reference << "\n";
    out << "\n[blanks referenced]\n";
    for (const auto& [sheet, n] : rep.blanks_referenced) out << sheet << ": " << n << "\n";
    return out.str();
}

inline std::vector<std::string> diff_audit(const AuditReport& a, const AuditReport& b) {
    std::vector<std::string> out;

    std::map<std::string, SheetSummary, CiLess> ta, tb;
    for (const auto& s : a.toc) ta[s.sheet] = s;
    for (const auto& s : b.toc) tb[s.sheet] = s;
    for (const auto& [name, s] : ta) {
        auto it = tb.find(name);
        if (it == tb.end()) {
            out.push_back("sheets/removed: " + name);
        } else if (it->second.cells != s.cells || it->second.formulas != s.formulas) {
            out.push_back("sheets/changed: " + name + " " + std::to_string(s.cells) + " cells, " +
                          std::to_string(s.formulas) + " formulas -> " + std::to_string(it->second.cells) +
                          " cells, " + std::to_string(it->second.formulas) + " formulas");
        }
    }
    for (const auto& [name, s] : tb) {
        (void)s;
        if (!ta.count(name)) out.push_back("sheets/added: " + name);
    }

    auto class_map = [](const AuditReport& r, const std::string& sheet) {
        std::map<std::string, int> m;
        for (const auto& [sn, classes] : r.distinct_formulas)
            if (ci_equal(sn, sheet))
                for (const auto& fc : classes) m[fc.normalized] = fc.count;
        return m;
    };
    std::set<std::string, CiLess> sheets;
    for (const auto& [sn, c] : a.distinct_formulas) { (void)c; sheets.insert(sn); }
    for (const auto& [sn, c] : b.distinct_formulas) { (void)c; sheets.insert(sn); }
    for (const auto& sheet : sheets) {
        auto ma = class_map(a, sheet), mb = class_map(b, sheet);
        if (ma == mb) continue;
        out.push_back("formulas[" + sheet + "]: " + std::to_string(ma.size()) +
                      (ma.size() == 1 ? " class -> " : " classes -> ") + std::to_string(mb.size()) +
                      (mb.size() == 1 ? " class" : " classes"));
        for (const auto& [key, n] : ma) {
            auto it = mb.find(key);
            if (it == mb.end())
                out.push_back("formulas[" + sheet + "]/removed: " + key + " x" + std::to_string(n));
            else if (it->second != n)
                out.push_back("formulas[" + sheet + "]/changed: " + key + " x" + std::to_string(n) + " -> x" +
                              std::to_string(it->second));
        }
        for (const auto& [key, n] : mb)
            if (!ma.count(key)) out.push_back("formulas[" + sheet + "]/added: " + key + " x" + std::to_string(n));
    }

    auto diff_lists = [&](const std::vector<std::string>& la, const std::vector<std::string>& lb,
                          const std::string& section) {
        std::set<std::string> sa(la.begin(), la.end()), sb(lb.begin(), lb.end());
        for (const auto& x : sa)
            if (!sb.count(x)) out.push_back(section + "/removed: " + x);
        for (const auto& x : sb)
            if (!sa.count(x)) out.push_back(section + "/added: " + x);
    };
    diff_lists(a.names, b.names, "names");

    auto link_lines = [](const AuditReport& r) {
        std::vector<std::string> v;
        for (const auto& l : r.external_links) v.push_back(l.site.full() + " -> " + l.reference);
        return v;
    };
    diff_lists(link_lines(a), link_lines(b), "external_links");

    std::map<std::string, int, CiLess> ba, bb;
    for (const auto& [s, n] : a.blanks_referenced) ba[s] = n;
    for (const auto& [s, n] : b.blanks_referenced) bb[s] = n;
    std::set<std::string, CiLess> bsheets;
    for (const auto& [s, n] : ba) { (void)n; bsheets.insert(s); }
    for (const auto& [s, n] : bb) { (void)n; bsheets.insert(s); }
    for (const auto& s : bsheets) {
        int na = ba.count(s) ? ba[s] : 0;
        int nb = bb.count(s) ? bb[s] : 0;
        if (na != nb)
            out.push_back("blanks_referenced[" + s + "]: " + std::to_string(na) + " -> " + std::to_string(nb));
    }
    return out;
}

}  // namespace gridbook
