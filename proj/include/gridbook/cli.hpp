#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridbook/audit.hpp"
#include "gridbook/eval.hpp"
#include "gridbook/gridbook_format.hpp"
#include "gridbook/refactor.hpp"
#include "gridbook/smells.hpp"

namespace gridbook::cli {

namespace detail {

using gridbook::detail::trim;

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Workbook load_file(const std::string& path) { return load_gridbook(slurp(path)); }

inline void bind_links(Workbook& wb, const std::vector<std::string>& links) {
    for (const auto& spec : links) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw LoadError("--link expects NAME=FILE, got " + spec);
        wb.links[spec.substr(0, eq)] = load_file(spec.substr(eq + 1));
    }
}

inline CellAddress parse_cell_arg(const std::string& text) {
    auto bang = text.find('!');
    if (bang == std::string::npos) throw LoadError("expected SHEET!ADDR, got " + text);
    auto p = parse_a1(text.substr(bang + 1));
    if (!p) throw LoadError("bad address in " + text);
    return CellAddress{text.substr(0, bang), p->col, p->row};
}

inline Region parse_region_arg(const std::string& text) {
    auto bang = text.find('!');
    if (bang == std::string::npos) throw LoadError("expected SHEET!A1:B2, got " + text);
    std::string rect = text.substr(bang + 1);
    auto colon = rect.find(':');
    auto p1 = parse_a1(colon == std::string::npos ? rect : rect.substr(0, colon));
    auto p2 = colon == std::string::npos ? p1 : parse_a1(rect.substr(colon + 1));
    if (!p1 || !p2) throw LoadError("bad region " + text);
    Region r;
    r.sheet = text.substr(0, bang);
    r.col1 = std::min(p1->col, p2->col);
    r.col2 = std::max(p1->col, p2->col);
    r.row1 = std::min(p1->row, p2->row);
    r.row2 = std::max(p1->row, p2->row);
    return r;
}

inline std::set<int> parse_rules_arg(const std::string& text) {
    std::set<int> rules;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (item[0] == 'S' || item[0] == 's') item = item.substr(1);
        int n = std::stoi(item);
        if (n < 1 || n > 11) throw LoadError("unknown rule S" + item);
        rules.insert(n);
    }
    return rules;
}

inline void apply_config_line(LintConfig& cfg, const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    if (key == "long_formula_nodes") cfg.long_formula_nodes = as_int();
    else if (key == "long_formula_depth") cfg.long_formula_depth = as_int();
    else if (key == "dup_min_nodes") cfg.dup_min_nodes = as_int();
    else if (key == "envy_min_refs") cfg.envy_min_refs = as_int();
    else if (key == "clump_min_size") cfg.clump_min_size = as_int();
    else if (key == "clump_min_uses") cfg.clump_min_uses = as_int();
    else if (key == "rules") cfg.rules_enabled = parse_rules_arg(value);
    else if (key == "magic_whitelist") {
        cfg.magic_whitelist.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) cfg.magic_whitelist.insert(std::stod(trim(item)));
    } else {
        throw LoadError("unknown config key " + key);
    }
}

inline LintConfig load_config(const std::string& path) {
    LintConfig cfg;
    std::string text = slurp(path);
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("bad config line: " + line);
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline std::string finding_line(const Finding& f) {
    return f.rule_id() + " " + severity_text(f.severity) + " " + f.sheet + "!" + f.location() + " " + f.message;
}

inline nlohmann::ordered_json finding_json(const Finding& f) {
    nlohmann::ordered_json j;
    j["rule"] = f.rule_id();
    j["severity"] = severity_text(f.severity);
    j["sheet"] = f.sheet;
    if (f.single_cell())
        j["cell"] = f.location();
    else
        j["region"] = f.location();
    j["message"] = f.message;
    j["evidence"] = f.evidence;
    j["suggestion"] = f.suggestion;
    return j;
}

inline nlohmann::ordered_json audit_json(const AuditReport& rep) {
    nlohmann::ordered_json j;
    j["sheets"] = nlohmann::ordered_json::array();
    for (const auto& s : rep.toc)
        j["sheets"].push_back({{"sheet", s.sheet}, {"cells", s.cells}, {"formulas", s.formulas}});
    j["distinct_formulas"] = nlohmann::ordered_json::object();
    for (const auto& [sheet, classes] : rep.distinct_formulas) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& fc : classes)
            arr.push_back({{"formula", fc.normalized},
                           {"count", fc.count},
                           {"first", fc.representative.a1()},
                           {"region", fc.region()}});
        j["distinct_formulas"][sheet] = arr;
    }
    j["names"] = rep.names;
    j["external_links"] = nlohmann::ordered_json::array();
    for (const auto& l : rep.external_links)
        j["external_links"].push_back({{"site", l.site.full()}, {"reference", l.reference}});
    j["blanks_referenced"] = nlohmann::ordered_json::object();
    for (const auto& [sheet, n] : rep.blanks_referenced) j["blanks_referenced"][sheet] = n;
    return j;
}

inline void print_plan(std::ostream& out, const RefactorPlan& plan) {
    out << plan.rule << " " << verdict_text(plan.verification.verdict) << ", " << plan.edits.size() << " edit"
        << (plan.edits.size() == 1 ? "" : "s") << "\n";
    for (const auto& e : plan.edits) {
        switch (e.kind) {
            case Edit::SetFormula: out << "  " << e.addr.full() << " = " << e.text << "\n"; break;
            case Edit::SetLiteral: out << "  " << e.addr.full() << " = " << e.text << "\n"; break;
            case Edit::DefineName: out << "  name " << e.text << "\n"; break;
        }
    }
    if (!plan.note.empty()) out << "  note: " << plan.note << "\n";
}

inline void print_diffs(std::ostream& err, const PreservationReport& rep) {
    for (const auto& d : rep.diffs)
        err << "  " << d.addr.full() << ": " << to_display(d.before) << " -> " << to_display(d.after) << "\n";
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"gridbook workbook analyzer"};
    app.require_subcommand(1);

    std::string file, file2, format = "text", config_path, rules_arg, out_path;
    std::vector<std::string> links;
    std::string cell_arg, at_arg, helper_arg, region_arg, name_arg, expr_arg, dest_cell_arg, helpers_arg, rule_arg;
    double value_arg = 0;
    bool have_value = false, force = false, swap_layout = false, all_sheet = false;

    auto* lint = app.add_subcommand("lint", "detect formula smells");
    lint->add_option("file", file)->required();
    lint->add_option("--config", config_path);
    lint->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    lint->add_option("--rules", rules_arg);
    lint->add_option("--link", links);

    auto* audit = app.add_subcommand("audit", "report non-obvious workbook content");
    audit->add_option("file", file)->required();
    audit->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

    auto* adiff = app.add_subcommand("audit-diff", "diff the audits of two workbooks");
    adiff->add_option("file1", file)->required();
    adiff->add_option("file2", file2)->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a workbook");
    eval_cmd->add_option("file", file)->required();
    eval_cmd->add_option("--cell", cell_arg);
    eval_cmd->add_option("--link", links);

    auto* refactor = app.add_subcommand("refactor", "apply a verified transformation");
    refactor->add_option("file", file)->required();
    refactor->add_option("--rule", rule_arg)->required();
    refactor->add_option("--at", at_arg);
    refactor->add_option("--helper", helper_arg);
    refactor->add_option("--region", region_arg);
    refactor->add_option("--name", name_arg);
    refactor->add_option("--expr", expr_arg);
    refactor->add_option("--cell", dest_cell_arg);
    refactor->add_option("--value", value_arg)->each([&](const std::string&) { have_value = true; });
    refactor->add_flag("--swap", swap_layout, "put the extracted expression at --at, the rewritten formula at --helper");
    refactor->add_flag("--all-sheet", all_sheet, "rewrite the literal in every formula on the sheet");
    refactor->add_flag("--force", force);
    refactor->add_option("--out", out_path);
    refactor->add_option("--link", links);

    auto* verify = app.add_subcommand("verify", "compare evaluated values of two workbooks");
    verify->add_option("file1", file)->required();
    verify->add_option("file2", file2)->required();
    verify->add_option("--helpers", helpers_arg, "cells excluded from comparison, e.g. S!D1:F1");
    verify->add_option("--link", links);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        err << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*lint) {
            LintConfig cfg = config_path.empty() ? LintConfig{} : detail::load_config(config_path);
            if (!rules_arg.empty()) cfg.rules_enabled = detail::parse_rules_arg(rules_arg);
            Workbook wb = detail::load_file(file);
            detail::bind_links(wb, links);
            auto findings = detect_all(wb, cfg);
            if (format == "json") {
                nlohmann::ordered_json j;
                j["findings"] = nlohmann::ordered_json::array();
                for (const auto& f : findings) j["findings"].push_back(detail::finding_json(f));
                out << j.dump(2) << "\n";
            } else {
                for (const auto& f : findings) out << detail::finding_line(f) << "\n";
            }
            for (const auto& f : findings)
                if (f.severity != Severity::Info) return 1;
            return 0;
        }
        if (*audit) {
            AuditReport rep = generate_audit(detail::load_file(file));
            if (format == "json")
                out << detail::audit_json(rep).dump(2) << "\n";
            else
                out << render_audit(rep);
            return 0;
        }
        if (*adiff) {
            AuditReport a = generate_audit(detail::load_file(file));
            AuditReport b = generate_audit(detail::load_file(file2));
            for (const auto& line : diff_audit(a, b)) out << line << "\n";
            return 0;
        }
        if (*eval_cmd) {
            Workbook wb = detail::load_file(file);
            detail::bind_links(wb, links);
            ValueGrid grid = evaluate(wb);
            if (!cell_arg.empty()) {
                CellAddress at = detail::parse_cell_arg(cell_arg);
                auto it = grid.find(at);
                out << at.full() << " = " << to_display(it == grid.end() ? Value::blank() : it->second) << "\n";
            } else {
                for (const auto& [addr, val] : grid) out << addr.full() << " = " << to_display(val) << "\n";
            }
            return 0;
        }
        if (*verify) {
            Workbook a = detail::load_file(file);
            Workbook b = detail::load_file(file2);
            detail::bind_links(a, links);
            detail::bind_links(b, links);
            std::set<CellAddress> helpers;
            if (!helpers_arg.empty()) {
                Region r = detail::parse_region_arg(helpers_arg);
                for (int row = r.row1; row <= r.row2; ++row)
                    for (int col = r.col1; col <= r.col2; ++col) helpers.insert(CellAddress{r.sheet, col, row});
            }
            PreservationReport rep = verify_preservation(a, b, helpers);
            out << verdict_text(rep.verdict) << ", " << rep.diffs.size() << " diff"
                << (rep.diffs.size() == 1 ? "" : "s") << "\n";
            detail::print_diffs(out, rep);
            return rep.verdict == Verdict::Preserved ? 0 : 1;
        }
        if (*refactor) {
            Workbook wb = detail::load_file(file);
            detail::bind_links(wb, links);
            Workbook result;
            RefactorPlan plan;
            auto at = [&] { return detail::parse_cell_arg(at_arg); };
            auto helper = [&] { return detail::parse_cell_arg(helper_arg); };
            if (rule_arg == "R1") {
                if (expr_arg.empty()) throw RefactorError("R1 needs --expr");
                std::tie(result, plan) = r1_extract_expression(wb, at(), expr_arg, helper(), swap_layout, force);
            } else if (rule_arg == "R2") {
                std::tie(result, plan) = r2_iferror_rewrite(wb, at(), force);
            } else if (rule_arg == "R3") {
                if (!have_value) throw RefactorError("R3 needs --value");
                std::tie(result, plan) = r3_extract_magic_number(wb, at(), value_arg,
                                                                 detail::parse_cell_arg(dest_cell_arg), name_arg,
                                                                 all_sheet, force);
            } else if (rule_arg == "R4") {
                if (name_arg.empty() || region_arg.empty()) throw RefactorError("R4 needs --name and --region");
                std::string target = dest_cell_arg;
                if (target.empty()) {
                    const DefinedName* dn = wb.find_name(name_arg);
                    if (!dn) throw RefactorError("name " + name_arg + " not defined; pass --cell SHEET!ADDR");
                    target = dn->target_first.sheet.value_or("") + "!" + ref_a1_local(dn->target_first);
                }
                std::tie(result, plan) = r4_apply_name(wb, detail::parse_region_arg(region_arg), target, name_arg,
                                                       force);
            } else if (rule_arg == "R5") {
                if (region_arg.empty()) throw RefactorError("R5 needs --region and --at (master)");
                std::tie(result, plan) = r5_regularize_region(wb, detail::parse_region_arg(region_arg), at(), force);
            } else if (rule_arg == "R6") {
                std::vector<CellAddress> sites;
                std::stringstream ss(at_arg);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!detail::trim(item).empty()) sites.push_back(detail::parse_cell_arg(detail::trim(item)));
                std::tie(result, plan) = r6_lookup_to_match_index(wb, sites, helper(), force);
            } else if (rule_arg == "R7") {
                std::tie(result, plan) = r7_split_addition_chain(wb, at(), helper(), force);
            } else {
                err << "unknown rule " << rule_arg << "\n";
                return 2;
            }
            detail::print_plan(out, plan);
            if (!plan.committed) {
                err << "verification failed; output not written (use --force to override)\n";
                detail::print_diffs(err, plan.verification);
                return 1;
            }
            if (!out_path.empty()) {
                std::ofstream f(out_path, std::ios::binary);
                if (!f) throw LoadError("cannot write " + out_path);
                f << save_gridbook(result);
            }
            return 0;
        }
    } catch (const RefactorError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const LoadError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace gridbook::cli
