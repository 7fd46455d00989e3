#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gridbook/audit.hpp"
#include "gridbook/refactor.hpp"
#include "test_util.hpp"

using namespace gridbook;
using namespace testutil;

static std::string formula_text(const Workbook& wb, const CellAddress& at) {
    const Cell* c = wb.cell_at(at);
    REQUIRE(c);
    REQUIRE(c->is_formula());
    return c->formula().text;
}

// every committed plan must only touch blank cells or its explicit targets
static void check_helper_hygiene(const Workbook& before, const RefactorPlan& plan,
                                 const std::set<CellAddress>& targets) {
    for (const auto& e : plan.edits) {
        if (e.kind == Edit::DefineName) continue;
        if (targets.count(e.addr)) continue;
        INFO(plan.rule << " edit at " << e.addr.full());
        CHECK(before.cell_at(e.addr) == nullptr);
    }
}

TEST_CASE("R1 swap layout reproduces the two-cell lookup split") {
    Workbook wb = load_fixture("lookup_guard.gridbook");
    auto [out, plan] = r1_extract_expression(wb, addr("S", "B2"), "VLOOKUP(D2,$J$1:$M$10,2,FALSE)",
                                             addr("S", "C2"), /*swap=*/true);
    CHECK(plan.verification.verdict == Verdict::Preserved);
    CHECK(plan.verification.diffs.empty());
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "B2")) == "=VLOOKUP(D2,$J$1:$M$10,2,FALSE)");
    CHECK(formula_text(out, addr("S", "C2")) == "=IF(ISNA(B2),\"\",B2)");
    check_helper_hygiene(wb, plan, {addr("S", "B2")});
    // the rewritten formula reproduces the original cell's value
    CHECK(to_display(evaluate_cell(out, addr("S", "C2"))) == to_display(evaluate_cell(wb, addr("S", "B2"))));
}

TEST_CASE("R1 plain extraction") {
    Workbook wb = load_gridbook("[sheet S]\nA1 = =(1+1)*(1+1)\n");
    auto [out, plan] = r1_extract_expression(wb, addr("S", "A1"), "1+1", addr("S", "H1"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "H1")) == "=1+1");
    CHECK(formula_text(out, addr("S", "A1")) == "=H1*H1");

    CHECK_THROWS(r1_extract_expression(wb, addr("S", "A1"), "2+2", addr("S", "H1")));  // not present
    Workbook busy = load_gridbook("[sheet S]\nA1 = =(1+1)*(1+1)\nH1 = 5\n");
    CHECK_THROWS(r1_extract_expression(busy, addr("S", "A1"), "1+1", addr("S", "H1")));  // helper occupied
}

TEST_CASE("R1 pins relative references when the expression moves") {
    // A1+A2 extracted from B1 to D5: left in place the refs would drift by (2,4)
    Workbook wb = load_gridbook("[sheet S]\nA1 = 3\nA2 = 4\nB1 = =(A1+A2)*(A1+A2)\n");
    auto [out, plan] = r1_extract_expression(wb, addr("S", "B1"), "A1+A2", addr("S", "D5"));
    CHECK(plan.verification.verdict == Verdict::Preserved);
    CHECK(formula_text(out, addr("S", "D5")) == "=$A$1+$A$2");
    CHECK(evaluate_cell(out, addr("S", "B1")).as_number() == 49);
}

TEST_CASE("R1 preserves values on randomized workbooks with a duplicated subtree") {
    std::mt19937 rng(5);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    for (int trial = 0; trial < 100; ++trial) {
        Workbook wb;
        for (int i = 1; i <= 4; ++i)
            wb.set_cell(CellAddress{"S", 1, i}, Cell::of_value(Value::number(pick(50))));
        std::string sub = "($A$1+$A$" + std::to_string(2 + pick(3)) + "*" + std::to_string(1 + pick(9)) + ")";
        std::string f = "=" + sub + (pick(2) ? "+" : "*") + sub;
        wb.set_cell(addr("S", "C1"), Cell::of_formula(f));
        auto [out, plan] = r1_extract_expression(wb, addr("S", "C1"), sub, addr("S", "E1"));
        INFO("trial " << trial << " " << f);
        REQUIRE(plan.verification.verdict == Verdict::Preserved);
        REQUIRE(plan.committed);
    }
}

TEST_CASE("R2 rewrites the guard idiom") {
    Workbook wb = load_gridbook(
        "[sheet S]\nD2 = \"x\"\nJ1 = \"x\"\nK1 = 7\n"
        "B2 = =IF(ISNA(VLOOKUP(D2,$J$1:$K$1,2,FALSE)),\"\",VLOOKUP(D2,$J$1:$K$1,2,FALSE))\n");
    auto [out, plan] = r2_iferror_rewrite(wb, addr("S", "B2"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "B2")) == "=IFERROR(VLOOKUP(D2,$J$1:$K$1,2,FALSE),\"\")");

    Workbook div = load_gridbook("[sheet S]\nA1 = 10\nA2 = 4\nB1 = =IF(ISERROR(A1/A2),0,A1/A2)\n");
    auto [out2, plan2] = r2_iferror_rewrite(div, addr("S", "B1"));
    CHECK(plan2.committed);
    CHECK(formula_text(out2, addr("S", "B1")) == "=IFERROR(A1/A2,0)");

    Workbook bad = load_gridbook("[sheet S]\nA1 = 1\nB1 = =IF(ISNA(A1),0,A1+1)\n");
    CHECK_THROWS_WITH(r2_iferror_rewrite(bad, addr("S", "B1")), Catch::Matchers::ContainsSubstring("pattern mismatch"));
}

TEST_CASE("R2 refuses when a non-NA error changes the result") {
    Workbook wb = load_fixture("r2_refusal.gridbook");
    auto [out, plan] = r2_iferror_rewrite(wb, addr("S", "B1"));
    CHECK(plan.verification.verdict == Verdict::Changed);
    CHECK_FALSE(plan.committed);
    CHECK(workbook_equal(out, wb));  // nothing was applied
    REQUIRE(plan.verification.diffs.size() == 1);
    CHECK(plan.verification.diffs[0].addr == addr("S", "B1"));
    CHECK(plan.verification.diffs[0].before.as_error() == ErrorKind::DIV0);
    CHECK(plan.verification.diffs[0].after.as_number() == 99);
}

TEST_CASE("R3 moves a magic number out") {
    Workbook wb = load_gridbook("[sheet S]\nB2 = 100\nC2 = =B2*1.21\n");
    auto [out, plan] = r3_extract_magic_number(wb, addr("S", "C2"), 1.21, addr("S", "D1"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "C2")) == "=B2*$D$1");
    CHECK(out.cell_at(addr("S", "D1"))->literal().as_number() == 1.21);

    auto [named, plan2] = r3_extract_magic_number(wb, addr("S", "C2"), 1.21, addr("S", "D1"), "VatRate");
    CHECK(formula_text(named, addr("S", "C2")) == "=B2*VatRate");
    REQUIRE(named.names.size() == 1);
    CHECK(named.names[0].name == "VatRate");

    CHECK_THROWS_WITH(r3_extract_magic_number(wb, addr("S", "C2"), 1.0, addr("S", "D1")),
                      Catch::Matchers::ContainsSubstring("not a magic number"));
    Workbook busy = load_gridbook("[sheet S]\nB2 = 100\nC2 = =B2*1.21\nD1 = 9\n");
    CHECK_THROWS(r3_extract_magic_number(busy, addr("S", "C2"), 1.21, addr("S", "D1")));
}

TEST_CASE("R4 applies a name across the region, ignoring the dollar flags") {
    Workbook wb = load_fixture("discount.gridbook");
    Region region{"S", 3, 2, 3, 5};
    auto [out, plan] = r4_apply_name(wb, region, "S!$D$1", "DiscountRate");
    CHECK(plan.committed);
    for (int r = 2; r <= 5; ++r)
        CHECK(formula_text(out, addr("S", "C" + std::to_string(r))) ==
              "=B" + std::to_string(r) + "*(1-DiscountRate)");
    // region is now copy-equivalent
    for (int r = 3; r <= 5; ++r)
        CHECK(copy_equivalent(out.cell_at(addr("S", "C2"))->formula().ast, addr("S", "C2"),
                              out.cell_at(addr("S", "C" + std::to_string(r)))->formula().ast,
                              addr("S", "C" + std::to_string(r))));
    // second application finds nothing left to rewrite
    auto [again, plan2] = r4_apply_name(out, region, "S!$D$1", "DiscountRate");
    CHECK(plan2.edits.empty());
    CHECK(plan2.verification.verdict == Verdict::Preserved);
    // mismatched existing name
    CHECK_THROWS_WITH(r4_apply_name(out, region, "S!$B$1", "DiscountRate"),
                      Catch::Matchers::ContainsSubstring("mismatch"));
}

TEST_CASE("R5 regularizes from a master formula") {
    // the pre-existing literal equals what the refilled formula computes
    Workbook ok = load_gridbook(
        "[sheet S]\nA1 = 1\nA2 = 2\nA3 = 3\nA4 = 4\n"
        "C1 = =A1*2\nC2 = =A2*2\nC3 = 6\nC4 = =A4*2\n");
    Region region{"S", 3, 1, 3, 4};
    auto [out, plan] = r5_regularize_region(ok, region, addr("S", "C1"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "C3")) == "=A3*2");

    // the literal disagrees: refuse and show the diff
    Workbook bad = load_gridbook(
        "[sheet S]\nA1 = 1\nA2 = 2\nA3 = 3\nA4 = 4\n"
        "C1 = =A1*2\nC2 = =A2*2\nC3 = 7\nC4 = =A4*2\n");
    auto [kept, plan2] = r5_regularize_region(bad, region, addr("S", "C1"));
    CHECK_FALSE(plan2.committed);
    CHECK(workbook_equal(kept, bad));
    REQUIRE(plan2.verification.diffs.size() == 1);
    CHECK(plan2.verification.diffs[0].addr == addr("S", "C3"));
    // force pushes it through
    auto [forced, plan3] = r5_regularize_region(bad, region, addr("S", "C1"), /*force=*/true);
    CHECK(plan3.committed);
    CHECK(formula_text(forced, addr("S", "C3")) == "=A3*2");

    // an already-regular region needs no edits
    auto [same, plan4] = r5_regularize_region(out, region, addr("S", "C1"));
    CHECK(plan4.edits.empty());
    CHECK(plan4.verification.verdict == Verdict::Preserved);
    CHECK_THROWS(r5_regularize_region(ok, region, addr("S", "D9")));  // master outside region
}

TEST_CASE("R6 converts exact lookups to MATCH plus INDEX") {
    Workbook wb = load_gridbook(
        "[sheet S]\nD2 = \"pear\"\n"
        "J1 = \"apple\"\nK1 = 3\nL1 = 101\n"
        "J2 = \"pear\"\nK2 = 5\nL2 = 102\n"
        "B2 = =VLOOKUP(D2,$J$1:$L$2,2,FALSE)\nC2 = =VLOOKUP(D2,$J$1:$L$2,3,FALSE)\n");
    std::vector<CellAddress> sites{addr("S", "B2"), addr("S", "C2")};
    auto [out, plan] = r6_lookup_to_match_index(wb, sites, addr("S", "H1"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "H1")) == "=MATCH($D$2,$J$1:$J$2,0)");
    CHECK(formula_text(out, addr("S", "B2")) == "=INDEX($K$1:$K$2,H1)");
    CHECK(formula_text(out, addr("S", "C2")) == "=INDEX($L$1:$L$2,H1)");

    CHECK_THROWS_WITH(r6_lookup_to_match_index(wb, {addr("S", "B2")}, addr("S", "H1")),
                      Catch::Matchers::ContainsSubstring(">= 2 sites"));
    Workbook approx = load_gridbook(
        "[sheet S]\nD2 = 5\nJ1 = 1\nK1 = 3\nL1 = 9\n"
        "B2 = =VLOOKUP(D2,$J$1:$L$1,2,TRUE)\nC2 = =VLOOKUP(D2,$J$1:$L$1,3,TRUE)\n");
    CHECK_THROWS_WITH(r6_lookup_to_match_index(approx, sites, addr("S", "H1")),
                      Catch::Matchers::ContainsSubstring("approximate"));
}

TEST_CASE("R6 preserves values on randomized tables including missing keys") {
    std::mt19937 rng(17);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    for (int trial = 0; trial < 100; ++trial) {
        Workbook wb;
        int rows = 2 + pick(6);
        for (int r = 1; r <= rows; ++r) {
            wb.set_cell(CellAddress{"S", 10, r}, Cell::of_value(Value::number(pick(8))));  // keys, dup-prone
            wb.set_cell(CellAddress{"S", 11, r}, Cell::of_value(Value::number(100 + r)));
            wb.set_cell(CellAddress{"S", 12, r}, Cell::of_value(Value::number(200 + r)));
        }
        wb.set_cell(addr("S", "D2"), Cell::of_value(Value::number(pick(10))));  // probe often misses
        std::string table = "$J$1:$L$" + std::to_string(rows);
        wb.set_cell(addr("S", "B2"), Cell::of_formula("=VLOOKUP(D2," + table + ",2,FALSE)"));
        wb.set_cell(addr("S", "C2"), Cell::of_formula("=VLOOKUP(D2," + table + ",3,FALSE)"));
        auto [out, plan] =
            r6_lookup_to_match_index(wb, {addr("S", "B2"), addr("S", "C2")}, addr("S", "H1"));
        INFO("trial " << trial);
        REQUIRE(plan.verification.verdict == Verdict::Preserved);
    }
}

TEST_CASE("R7 splits an addition chain") {
    Workbook wb = load_gridbook("[sheet S]\nA1 = 1\nB1 = 2\nC1 = 3\nD1 = =A1+B1+C1\n");
    auto [out, plan] = r7_split_addition_chain(wb, addr("S", "D1"), addr("S", "F1"));
    CHECK(plan.committed);
    CHECK(formula_text(out, addr("S", "F1")) == "=A1");
    CHECK(formula_text(out, addr("S", "G1")) == "=B1");
    CHECK(formula_text(out, addr("S", "H1")) == "=C1");
    CHECK(formula_text(out, addr("S", "D1")) == "=SUM(F1:H1)");
    CHECK(evaluate_cell(out, addr("S", "D1")).as_number() == 6);

    CHECK_THROWS(r7_split_addition_chain(load_gridbook("[sheet S]\nA1 = =1+2\n"), addr("S", "A1"), addr("S", "F1")));
    Workbook busy = load_gridbook("[sheet S]\nD1 = =1+2+3\nG1 = 9\n");
    CHECK_THROWS(r7_split_addition_chain(busy, addr("S", "D1"), addr("S", "F1")));  // helper range occupied
}

TEST_CASE("R7 decomposes the five-term chain") {
    Workbook wb = load_fixture("chain_original.gridbook");
    auto [out, plan] = r7_split_addition_chain(wb, addr("S", "AF10"), addr("S", "AH10"));
    CHECK(plan.verification.verdict == Verdict::Preserved);
    CHECK(plan.committed);
    CHECK(plan.edits.size() == 6);  // five helpers plus the SUM
    CHECK(formula_text(out, addr("S", "AF10")) == "=SUM(AH10:AL10)");
    check_helper_hygiene(wb, plan, {addr("S", "AF10")});
}

TEST_CASE("exact-value invariant for the non-reassociating refactorings") {
    // R1/R3/R4 must keep every original value bit-identical, not just within tolerance
    Workbook wb = load_fixture("discount.gridbook");
    auto [out, plan] = r4_apply_name(wb, Region{"S", 3, 2, 3, 5}, "S!$D$1", "DiscountRate");
    ValueGrid before = evaluate(wb), after = evaluate(out);
    for (const auto& [k, v] : before) REQUIRE(to_display(v) == to_display(after.at(k)));
}

TEST_CASE("verify_preservation basics") {
    Workbook wb = load_fixture("discount.gridbook");
    PreservationReport same = verify_preservation(wb, wb);
    CHECK(same.verdict == Verdict::Preserved);
    CHECK(same.diffs.empty());

    Workbook tweaked = wb;
    tweaked.set_cell(addr("S", "B2"), Cell::of_value(Value::number(11)));
    PreservationReport rep = verify_preservation(wb, tweaked);
    CHECK(rep.verdict == Verdict::Changed);
    // the edited input and its dependent both moved
    CHECK(rep.diffs.size() == 2);
    // excluding the touched cells turns it back into preserved
    PreservationReport excl = verify_preservation(wb, tweaked, {addr("S", "B2"), addr("S", "C2")});
    CHECK(excl.verdict == Verdict::Preserved);
}

TEST_CASE("R5 preserves values over randomized regular tables") {
    std::mt19937 rng(23);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    for (int trial = 0; trial < 100; ++trial) {
        Workbook wb;
        int rows = 3 + pick(8);
        for (int r = 1; r <= rows; ++r) {
            wb.set_cell(CellAddress{"S", 1, r}, Cell::of_value(Value::number(pick(100))));
            wb.set_cell(CellAddress{"S", 2, r}, Cell::of_value(Value::number(1 + pick(9))));
        }
        std::string master = pick(2) ? "=A1*B1+$A$1" : "=A1/B1";
        wb.set_cell(CellAddress{"S", 3, 1}, Cell::of_formula(master));
        for (int r = 2; r <= rows; ++r) {
            AstPtr filled = refill(parse(master), CellAddress{"S", 3, 1}, CellAddress{"S", 3, r});
            wb.set_cell(CellAddress{"S", 3, r}, Cell::of_formula(serialize(filled)));
        }
        auto [out, plan] = r5_regularize_region(wb, Region{"S", 3, 1, 3, rows}, CellAddress{"S", 3, 1 + pick(rows)});
        INFO("trial " << trial << " master " << master);
        REQUIRE(plan.verification.verdict == Verdict::Preserved);
        REQUIRE(plan.edits.empty());  // a regular region refills to itself
    }
}
