// End-to-end acceptance checks. Each criterion prints exactly one pass/fail
// line; the process exits nonzero if any of them fail.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "gridbook/audit.hpp"
#include "gridbook/cli.hpp"
#include "gridbook/refactor.hpp"
#include "gridbook/smells.hpp"
#include "test_util.hpp"

using namespace gridbook;
using namespace testutil;

namespace {

int failures = 0;
std::ostringstream detail;

void report(const char* name, bool ok) {
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    if (!ok) {
        ++failures;
        std::string d = detail.str();
        if (!d.empty()) std::cout << d;
    }
    detail.str("");
}

bool expect(bool cond, const std::string& what) {
    if (!cond) detail << "      " << what << "\n";
    return cond;
}

std::string ftext(const Workbook& wb, const CellAddress& at) {
    const Cell* c = wb.cell_at(at);
    return c && c->is_formula() ? c->formula().text : "";
}

// ---- 1: duplicated-lookup pipeline -------------------------------------------

bool criterion1() {
    auto start = std::chrono::steady_clock::now();
    bool ok = true;
    Workbook wb = load_fixture("lookup_guard.gridbook");

    int s1 = 0;
    for (const auto& f : detect_all(wb))
        if (f.rule == 1) ++s1;
    ok &= expect(s1 == 1, "expected exactly one S1 finding, got " + std::to_string(s1));

    auto [split, p1] = r1_extract_expression(wb, addr("S", "B2"), "VLOOKUP(D2,$J$1:$M$10,2,FALSE)",
                                             addr("S", "C2"), /*swap=*/true);
    ok &= expect(p1.verification.verdict == Verdict::Preserved && p1.verification.diffs.empty(),
                 "R1 verification not clean");
    ok &= expect(ftext(split, addr("S", "B2")) == "=VLOOKUP(D2,$J$1:$M$10,2,FALSE)",
                 "B2 is " + ftext(split, addr("S", "B2")));
    ok &= expect(ftext(split, addr("S", "C2")) == "=IF(ISNA(B2),\"\",B2)",
                 "C2 is " + ftext(split, addr("S", "C2")));

    auto [merged, p2] = r2_iferror_rewrite(split, addr("S", "C2"));
    ok &= expect(p2.verification.verdict == Verdict::Preserved, "R2 verification not clean");
    ok &= expect(ftext(merged, addr("S", "C2")) == "=IFERROR(B2,\"\")",
                 "C2 after R2 is " + ftext(merged, addr("S", "C2")));

    auto elapsed = std::chrono::steady_clock::now() - start;
    ok &= expect(elapsed < std::chrono::seconds(1), "pipeline exceeded 1 s");
    return ok;
}

// ---- 2: discount-table pipeline -----------------------------------------------

bool criterion2() {
    bool ok = true;
    Workbook wb = load_fixture("discount.gridbook");

    bool saw_s4 = false;
    for (const auto& f : detect_all(wb)) saw_s4 |= f.rule == 4;
    ok &= expect(saw_s4, "expected an S4 finding on the irregular column");

    Region region{"S", 3, 2, 3, 5};
    auto [named, p1] = r4_apply_name(wb, region, "S!$D$1", "DiscountRate");
    ok &= expect(p1.committed, "R4 did not commit");
    auto [fixed, p2] = r5_regularize_region(named, region, addr("S", "C2"));
    ok &= expect(p2.committed, "R5 did not commit");

    AuditReport rep = generate_audit(fixed);
    bool one_class = rep.distinct_formulas.size() == 1 && rep.distinct_formulas[0].second.size() == 1 &&
                     rep.distinct_formulas[0].second[0].count == 4;
    ok &= expect(one_class, "audit does not show one class of count 4");

    // inputs 10/12/9/15 at rate 0.1 give exactly these, with no tolerance
    ValueGrid grid = evaluate(fixed);
    const double want[] = {9, 10.8, 8.1, 13.5};
    for (int r = 2; r <= 5; ++r) {
        Value v = grid[addr("S", "C" + std::to_string(r))];
        ok &= expect(v.is_number() && v.as_number() == want[r - 2],
                     "C" + std::to_string(r) + " = " + to_display(v));
    }
    ok &= expect(verify_preservation(wb, fixed).verdict == Verdict::Preserved, "pipeline changed values");
    return ok;
}

// ---- 3: five-term chain vs its decomposition over random inputs ----------------

bool criterion3() {
    bool ok = true;
    Workbook original = load_fixture("chain_original.gridbook");
    Workbook decomposed = load_fixture("chain_decomposed.gridbook");
    const CellAddress result = addr("S", "AF10");

    std::mt19937 rng(2026);
    auto day = [&] {  // a random date in 1990-2030 as a formula
        int y = 1990 + int(rng() % 41), m = 1 + int(rng() % 12), d = 1 + int(rng() % 28);
        return "=DATE(" + std::to_string(y) + "," + std::to_string(m) + "," + std::to_string(d) + ")";
    };
    const char* cols[] = {"S", "T", "U", "V", "W"};
    for (int trial = 0; trial < 100 && ok; ++trial) {
        std::string q10 = day();
        double q24 = double(rng() % 20000);
        auto inject = [&](Workbook& wb) {
            wb.set_cell(addr("S", "Q10"), Cell::of_formula(q10));
            wb.set_cell(addr("S", "Q24"), Cell::of_value(Value::number(q24)));
            for (int i = 0; i < 5; ++i) {
                std::string c = cols[i];
                wb.set_cell(addr("S", c + "4"), Cell::of_value(Value::number(1990 + int(rng() % 41))));
                if (rng() % 5 == 0)
                    wb.find_sheet("S")->erase(addr("S", c + "10").col, 10);  // blank with p = 0.2
                else
                    wb.set_cell(addr("S", c + "10"), Cell::of_formula(day()));
            }
        };
        std::mt19937 saved = rng;
        Workbook a = original;
        inject(a);
        rng = saved;  // identical inputs for both layouts
        Workbook b = decomposed;
        inject(b);

        Value va = evaluate_cell(a, result);
        Value vb = evaluate_cell(b, result);
        bool same = va.is_number() && vb.is_number() &&
                    std::fabs(va.as_number() - vb.as_number()) <= 1e-12 * std::max(1.0, std::fabs(va.as_number()));
        ok &= expect(same, "trial " + std::to_string(trial) + ": " + to_display(va) + " vs " + to_display(vb));

        auto [split, plan] = r7_split_addition_chain(a, result, addr("S", "AH10"));
        ok &= expect(plan.verification.verdict == Verdict::Preserved,
                     "R7 changed values on trial " + std::to_string(trial));
    }
    return ok;
}

// ---- 4: parser round-trip properties -------------------------------------------

bool criterion4() {
    bool ok = true;
    AstGen gen(99);
    for (int i = 0; i < 1000 && ok; ++i) {
        AstPtr ast = gen.gen(4);
        std::string text = serialize(ast);
        AstPtr back;
        try {
            back = parse(text);
        } catch (const ParseError& e) {
            ok &= expect(false, text + " failed to re-parse: " + e.what());
            break;
        }
        ok &= expect(ast_equal(back, canonicalize_grouping(ast)), "round trip broke " + text);
        ok &= expect(serialize(back) == text, "serialize not a fixpoint on " + text);
    }

    // everything the fixture corpus stores must survive parse -> print -> parse
    const char* corpus[] = {"lookup_guard.gridbook",  "discount.gridbook",       "chain_original.gridbook",
                            "chain_decomposed.gridbook", "r2_refusal.gridbook"};
    for (const char* name : corpus) {
        Workbook wb = load_fixture(name);
        for (const auto& sheet : wb.sheets)
            for (const auto& [pos, cell] : sheet.cells) {
                if (!cell.is_formula()) continue;
                std::string text = serialize(cell.formula().ast);
                ok &= expect(serialize(parse(text)) == text, std::string(name) + ": " + text);
            }
    }

    // formula shapes the tool must accept verbatim
    const char* verbatim[] = {
        "=IF(ISNA(VLOOKUP(D2,$J$1:$M$10,2,FALSE)),\"\",VLOOKUP(D2,$J$1:$M$10,2,FALSE))",
        "=IFERROR(VLOOKUP(D2,$J$1:$M$10,2,FALSE),\"\")",
        "=B2*(1-D1)",
        "=IF(D3=0,0,D2/D3)",
        "=IF($S10<>\"\",MAX($S10,$Q10,DATE($S$4,12,31),0,W$4-YEAR($Q10),$Q24,1),0)",
        "=MAX(Q10,$W$4-YEAR(Q10),Q24,1)",
        "=IF(S10=\"\",0,MAX($Z10,S10,DATE($S$4,12,31)))",
        "=SUM(AA10:AE10)",
        "='F:\\Topdir1\\[source1.xls]Sheet1'!$A$2",
        "=[source1.xls]Sheet1!$A$2",
        "=[source1.ext]!Somename",
    };
    for (const char* f : verbatim) {
        try {
            parse(f);
        } catch (const ParseError& e) {
            ok &= expect(false, std::string(f) + ": " + e.what());
        }
    }
    return ok;
}

// ---- 5: evaluator against a naive fixpoint sweep --------------------------------

Value sweep_eval(const Workbook& wb, const CellAddress& target) {
    // repeatedly re-evaluate every formula against the previous grid until settled
    Evaluator ev(wb);
    ValueGrid grid;
    std::vector<std::pair<CellAddress, AstPtr>> formulas;
    for (const auto& sheet : wb.sheets)
        for (const auto& [pos, cell] : sheet.cells) {
            CellAddress at{sheet.name, pos.second, pos.first};
            if (cell.is_formula())
                formulas.push_back({at, cell.formula().ast});
            else
                grid[at] = cell.literal();
        }
    auto look = [&](const CellAddress& a) -> Value {
        auto it = grid.find(a);
        return it == grid.end() ? Value::blank() : it->second;
    };
    for (size_t pass = 0; pass <= formulas.size(); ++pass)
        for (const auto& [at, ast] : formulas) grid[at] = ev.eval_formula(at, ast, look);
    auto it = grid.find(target);
    return it == grid.end() ? Value::blank() : it->second;
}

bool criterion5() {
    bool ok = true;
    std::mt19937 rng(7);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    for (int trial = 0; trial < 200 && ok; ++trial) {
        // cells A1..An; every formula only references strictly earlier rows,
        // so the workbook is acyclic by construction
        int n = 2 + pick(19);
        Workbook wb;
        for (int r = 1; r <= n; ++r) {
            CellAddress at{"S", 1, r};
            if (r == 1 || pick(3) == 0) {
                wb.set_cell(at, Cell::of_value(Value::number(pick(100) - 50)));
                continue;
            }
            auto cell = [&] { return "A" + std::to_string(1 + pick(r - 1)); };
            std::string f;
            switch (pick(6)) {
                case 0: f = "=" + cell() + "+" + cell(); break;
                case 1: f = "=" + cell() + "*" + cell() + "-" + cell(); break;
                case 2: f = "=IF(" + cell() + ">" + cell() + "," + cell() + "," + cell() + ")"; break;
                case 3: f = "=SUM(A1:A" + std::to_string(r - 1) + ")"; break;
                case 4: f = "=" + cell() + "/" + cell(); break;
                default: f = "=MAX(" + cell() + "," + cell() + ")"; break;
            }
            wb.set_cell(at, Cell::of_formula(f));
        }
        ValueGrid grid = evaluate(wb);
        for (int r = 1; r <= n && ok; ++r) {
            CellAddress at{"S", 1, r};
            Value fast = grid[at], slow = sweep_eval(wb, at);
            ok &= expect(to_display(fast) == to_display(slow),
                         "trial " + std::to_string(trial) + " " + at.full() + ": " + to_display(fast) +
                             " vs " + to_display(slow));
        }
    }

    // exact/approximate lookup semantics, >= 20 cases
    Workbook t = load_gridbook(
        "[sheet S]\n"
        "A1 = 1\nB1 = \"one\"\nA2 = 3\nB2 = \"three\"\nA3 = 7\nB3 = \"seven\"\n"
        "J1 = \"alpha\"\nK1 = 10\nJ2 = \"Beta\"\nK2 = 20\n"
        "A5 = 1\nB5 = 3\nC5 = 7\nA6 = \"one\"\nB6 = \"three\"\nC6 = \"seven\"\n");
    const std::pair<const char*, const char*> cases[] = {
        {"=VLOOKUP(3,A1:B3,2,FALSE)", "three"},
        {"=VLOOKUP(4,A1:B3,2,FALSE)", "#N/A"},
        {"=VLOOKUP(4,A1:B3,2,TRUE)", "three"},
        {"=VLOOKUP(4,A1:B3,2)", "three"},
        {"=VLOOKUP(7,A1:B3,2,TRUE)", "seven"},
        {"=VLOOKUP(99,A1:B3,2,TRUE)", "seven"},
        {"=VLOOKUP(1,A1:B3,2,TRUE)", "one"},
        {"=VLOOKUP(0,A1:B3,2,TRUE)", "#N/A"},  // first value greater than the probe
        {"=VLOOKUP(3,A1:B3,1,FALSE)", "3"},
        {"=VLOOKUP(3,A1:B3,4,FALSE)", "#REF!"},
        {"=VLOOKUP(3,A1:B3,0,FALSE)", "#VALUE!"},
        {"=VLOOKUP(\"beta\",J1:K2,2,FALSE)", "20"},    // text match ignores case
        {"=VLOOKUP(\"gamma\",J1:K2,2,FALSE)", "#N/A"},
        {"=VLOOKUP(\"alpha\",J1:K2,2,TRUE)", "10"},
        {"=VLOOKUP(3,J1:K2,2,FALSE)", "#N/A"},  // class mismatch never matches
        {"=HLOOKUP(3,A5:C6,2,FALSE)", "three"},
        {"=HLOOKUP(4,A5:C6,2,FALSE)", "#N/A"},
        {"=HLOOKUP(4,A5:C6,2,TRUE)", "three"},
        {"=HLOOKUP(0,A5:C6,2,TRUE)", "#N/A"},
        {"=HLOOKUP(4,A5:C6,2)", "three"},
        {"=HLOOKUP(3,A5:C6,3,FALSE)", "#REF!"},
        {"=VLOOKUP(NA(),A1:B3,2,FALSE)", "#N/A"},
    };
    for (const auto& [f, want] : cases) {
        Workbook probe = t;
        probe.set_cell(addr("S", "Z9"), Cell::of_formula(f));
        Value got = evaluate_cell(probe, addr("S", "Z9"));
        ok &= expect(to_display(got) == want, std::string(f) + " = " + to_display(got) + ", want " + want);
    }
    return ok;
}

// ---- 6: smell corpus coverage, stability, monotonicity --------------------------

bool criterion6() {
    bool ok = true;
    for (int rule = 1; rule <= 11; ++rule) {
        std::string base = "smells/s" + std::to_string(rule);
        Workbook pos = load_fixture(base + "_pos.gridbook");
        Workbook neg = load_fixture(base + "_neg.gridbook");
        int np = 0, nn = 0;
        for (const auto& f : detect_all(pos)) np += f.rule == rule;
        // the S7 negative uses a named link, which is the sanctioned form: only a
        // warn-level address finding would count against it
        for (const auto& f : detect_all(neg))
            nn += f.rule == rule && !(rule == 7 && f.severity == Severity::Info);
        ok &= expect(np >= 1, "S" + std::to_string(rule) + " positive fixture found nothing");
        ok &= expect(nn == 0, "S" + std::to_string(rule) + " negative fixture raised " + std::to_string(nn));
    }

    // byte-stable output across runs
    const char* corpus[] = {"lookup_guard.gridbook", "discount.gridbook", "smells/s1_pos.gridbook",
                            "smells/s4_pos.gridbook"};
    for (const char* name : corpus) {
        Workbook wb = load_fixture(name);
        std::ostringstream a, b;
        for (const auto& f : detect_all(wb)) a << cli::detail::finding_line(f) << "\n";
        for (const auto& f : detect_all(wb)) b << cli::detail::finding_line(f) << "\n";
        ok &= expect(a.str() == b.str(), std::string(name) + " output unstable");
    }

    // raising a threshold by 50% must never create findings; lowering never removes
    struct Knob {
        int LintConfig::*field;
        int rule;
    };
    const Knob knobs[] = {
        {&LintConfig::long_formula_nodes, 2},
        {&LintConfig::dup_min_nodes, 1},
        {&LintConfig::envy_min_refs, 10},
        {&LintConfig::clump_min_size, 11},
        {&LintConfig::clump_min_uses, 11},
    };
    for (const Knob& k : knobs) {
        for (const char* name : {"smells/s1_pos.gridbook", "smells/s2_pos.gridbook", "smells/s10_pos.gridbook",
                                 "smells/s11_pos.gridbook", "lookup_guard.gridbook", "discount.gridbook"}) {
            Workbook wb = load_fixture(name);
            LintConfig cfg;
            int base = cfg.*(k.field);
            int prev = -1;
            for (int v : {base - base / 2, base, base + base / 2}) {
                cfg.*(k.field) = v;
                int count = 0;
                for (const auto& f : detect_all(wb, cfg)) count += f.rule == k.rule;
                if (prev >= 0)
                    ok &= expect(count <= prev, std::string(name) + " S" + std::to_string(k.rule) +
                                                    " grew from " + std::to_string(prev) + " to " +
                                                    std::to_string(count) + " at threshold " + std::to_string(v));
                prev = count;
            }
        }
    }
    return ok;
}

// ---- 7: no committed refactoring moves a non-helper value ------------------------

bool criterion7() {
    bool ok = true;

    // every plan the pipelines above produce is re-checked against the tolerance
    auto audit_plan = [&](const Workbook& before, const Workbook& after, const RefactorPlan& plan,
                          std::set<CellAddress> helpers) {
        if (!plan.committed) return;
        PreservationReport rep = verify_preservation(before, after, helpers);
        ok &= expect(rep.verdict == Verdict::Preserved,
                     plan.rule + " committed but moved " + std::to_string(rep.diffs.size()) + " value(s)");
    };

    {
        Workbook wb = load_fixture("lookup_guard.gridbook");
        auto [split, p1] = r1_extract_expression(wb, addr("S", "B2"), "VLOOKUP(D2,$J$1:$M$10,2,FALSE)",
                                                 addr("S", "C2"), true);
        audit_plan(wb, split, p1, {addr("S", "B2")});
        auto [merged, p2] = r2_iferror_rewrite(split, addr("S", "C2"));
        audit_plan(split, merged, p2, {});
    }
    {
        Workbook wb = load_fixture("discount.gridbook");
        Region region{"S", 3, 2, 3, 5};
        auto [named, p1] = r4_apply_name(wb, region, "S!$D$1", "DiscountRate");
        audit_plan(wb, named, p1, {});
        auto [fixed, p2] = r5_regularize_region(named, region, addr("S", "C2"));
        audit_plan(named, fixed, p2, {});
        Workbook vat = load_gridbook("[sheet S]\nB2 = 100\nC2 = =B2*1.21\n");
        auto [moved, p3] = r3_extract_magic_number(vat, addr("S", "C2"), 1.21, addr("S", "F1"));
        audit_plan(vat, moved, p3, {addr("S", "F1")});
    }
    {
        Workbook wb = load_fixture("chain_original.gridbook");
        auto [split, plan] = r7_split_addition_chain(wb, addr("S", "AF10"), addr("S", "AH10"));
        std::set<CellAddress> helpers;
        for (int i = 0; i < 5; ++i) helpers.insert(CellAddress{"S", addr("S", "AH10").col + i, 10});
        audit_plan(wb, split, plan, helpers);
    }
    {
        // two sites sharing the probe value and table, differing only in column
        Workbook two = load_fixture("lookup_guard.gridbook");
        two.set_cell(addr("S", "E2"), Cell::of_formula("=VLOOKUP(D2,$J$1:$M$10,3,FALSE)"));
        two.set_cell(addr("S", "F2"), Cell::of_formula("=VLOOKUP(D2,$J$1:$M$10,2,FALSE)"));
        auto [out, plan] = r6_lookup_to_match_index(two, {addr("S", "E2"), addr("S", "F2")}, addr("S", "H2"));
        audit_plan(two, out, plan, {addr("S", "H2")});
    }

    // the refusal counterexample: ISNA passes a #DIV/0! through, IFERROR would trap it
    Workbook refuse = load_fixture("r2_refusal.gridbook");
    auto [kept, plan] = r2_iferror_rewrite(refuse, addr("S", "B1"));
    ok &= expect(!plan.committed, "R2 committed the counterexample");
    ok &= expect(workbook_equal(kept, refuse), "refused plan still altered the workbook");
    return ok;
}

}  // namespace

int main() {
    report("1. duplicated-lookup pipeline matches the two-cell and IFERROR forms", criterion1());
    report("2. discount table regularizes to one formula class with exact values", criterion2());
    report("3. five-term chain and its decomposition agree on 100 random grids", criterion3());
    report("4. parser round-trips generated ASTs and every corpus formula", criterion4());
    report("5. evaluator matches a naive fixpoint sweep and the lookup suite", criterion5());
    report("6. smell corpus: coverage, byte stability, threshold monotonicity", criterion6());
    report("7. committed refactorings never move a non-helper value; R2 refuses", criterion7());
    return failures == 0 ? 0 : 1;
}
