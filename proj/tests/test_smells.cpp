#include <catch2/catch_amalgamated.hpp>

#include <climits>
#include <sstream>

#include "gridbook/smells.hpp"
#include "test_util.hpp"

using namespace gridbook;
using namespace testutil;

static int count_rule(const std::vector<Finding>& fs, int rule) {
    int n = 0;
    for (const auto& f : fs)
        if (f.rule == rule) ++n;
    return n;
}

static std::string render(const std::vector<Finding>& fs) {
    std::ostringstream out;
    for (const auto& f : fs)
        out << f.rule_id() << "|" << severity_text(f.severity) << "|" << f.sheet << "|" << f.location() << "|"
            << f.message << "|" << f.evidence << "|" << f.suggestion << "\n";
    return out.str();
}

TEST_CASE("positive and negative fixture per rule") {
    for (int rule = 1; rule <= 11; ++rule) {
        INFO("rule S" << rule);
        auto pos = detect_all(load_fixture("smells/s" + std::to_string(rule) + "_pos.gridbook"));
        CHECK(count_rule(pos, rule) >= 1);
        auto neg = detect_all(load_fixture("smells/s" + std::to_string(rule) + "_neg.gridbook"));
        if (rule == 7) {
            // a named external link is fine; only address links warn
            for (const auto& f : neg)
                if (f.rule == 7) CHECK(f.severity == Severity::Info);
        } else {
            CHECK(count_rule(neg, rule) == 0);
        }
    }
}

TEST_CASE("severity mapping") {
    auto expect = [](const std::vector<Finding>& fs, int rule, Severity sev) {
        for (const auto& f : fs)
            if (f.rule == rule) CHECK(f.severity == sev);
    };
    expect(detect_all(load_fixture("smells/s1_pos.gridbook")), 1, Severity::Warn);
    expect(detect_all(load_fixture("smells/s5_pos.gridbook")), 5, Severity::Warn);
    expect(detect_all(load_fixture("smells/s6_pos.gridbook")), 6, Severity::Info);
    auto s4 = detect_all(load_fixture("smells/s4_pos.gridbook"));
    bool saw_error = false;
    for (const auto& f : s4)
        if (f.rule == 4 && f.severity == Severity::Error) saw_error = true;
    CHECK(saw_error);  // a constant stomping a formula block is the one error-level smell
}

TEST_CASE("duplicated-expression details") {
    Workbook ex2 = load_fixture("lookup_guard.gridbook");
    auto fs = detect_all(ex2);
    REQUIRE(count_rule(fs, 1) == 1);
    for (const auto& f : fs)
        if (f.rule == 1) {
            CHECK(f.sheet == "S");
            CHECK(f.location() == "B2");
            CHECK(f.evidence == "VLOOKUP(D2,$J$1:$M$10,2,FALSE)");
            CHECK(f.suggestion == "R1");
        }

    // small subtrees are not reported
    auto small = detect_all(load_gridbook("[sheet S]\nA1 = 1\nB1 = =A1+A1\n"));
    CHECK(count_rule(small, 1) == 0);

    // a 5-node subtree shared by three formulas -> one finding naming all three cells
    auto cross = s1_duplicated_expression(load_fixture("smells/s1_pos.gridbook"), LintConfig{});
    int cross_findings = 0;
    for (const auto& f : cross)
        if (!f.single_cell()) {
            ++cross_findings;
            CHECK(f.message.find("F1") != std::string::npos);
            CHECK(f.message.find("F2") != std::string::npos);
            CHECK(f.message.find("F3") != std::string::npos);
        }
    CHECK(cross_findings == 1);
}

TEST_CASE("overlong formula boundary") {
    // a chain of k refs added together has 2k-1 nodes; 16 refs -> 31 nodes
    std::string base = "[sheet S]\nA1 = 1\nA2 = 2\n";
    auto chain = [&](int refs) {
        std::string f = "=A1";
        for (int i = 1; i < refs; ++i) f += i % 2 ? "+A2" : "+A1";
        return load_gridbook(base + "B1 = " + f + "\n");
    };
    LintConfig cfg;
    cfg.long_formula_depth = 1000;  // isolate the node-count threshold
    CHECK(count_rule(detect_all(chain(15), cfg), 2) == 0);   // 29 nodes
    CHECK(count_rule(detect_all(chain(16), cfg), 2) == 1);   // 31 nodes
    CHECK(count_rule(detect_all(load_gridbook("[sheet S]\nB1 = =1+2\n")), 2) == 0);
    // the long chain over two cells is a sum, not a sum of products
    Workbook deep = load_gridbook(base + "B1 = =A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2+A1*A2\n");
    auto fs = detect_all(deep, cfg);
    bool sumproduct_hint = false;
    for (const auto& f : fs)
        if (f.rule == 2 && f.message.find("SUMPRODUCT") != std::string::npos) sumproduct_hint = true;
    CHECK(sumproduct_hint);
}

TEST_CASE("magic numbers") {
    CHECK(count_rule(detect_all(load_gridbook("[sheet S]\nD1 = 0.1\nB2 = 10\nC2 = =B2*(1-D1)\n")), 3) == 0);
    auto vat = detect_all(load_gridbook("[sheet S]\nB2 = 10\nC2 = =B2*1.21\n"));
    REQUIRE(count_rule(vat, 3) == 1);
    for (const auto& f : vat)
        if (f.rule == 3) CHECK(f.evidence == "1.21");
    // lookup column indexes are always called out, whitelisted or not
    auto lk = detect_all(load_fixture("lookup_guard.gridbook"));
    int col_findings = 0;
    for (const auto& f : lk)
        if (f.rule == 3 && f.message.find("column index") != std::string::npos) ++col_findings;
    CHECK(col_findings >= 1);
    // DATE month/day literals are calendar structure, not knobs
    CHECK(count_rule(detect_all(load_gridbook("[sheet S]\nA1 = 2010\nB1 = =DATE(A1,12,31)\n")), 3) == 0);
}

TEST_CASE("irregular regions") {
    auto fs = detect_all(load_fixture("smells/s4_pos.gridbook"));
    bool constant_hit = false, omitted = false;
    for (const auto& f : fs) {
        if (f.rule != 4) continue;
        if (f.severity == Severity::Error && f.location() == "C4") constant_hit = true;
        if (f.message.find("omits") != std::string::npos && f.evidence == "A6") omitted = true;
    }
    CHECK(constant_hit);
    CHECK(omitted);

    // deviating formula (same shape, different anchoring) inside a regular run
    Workbook w = load_gridbook(
        "[sheet S]\nA1 = 1\nA2 = 2\nA3 = 3\nA4 = 4\nA5 = 5\n"
        "C1 = =A1*2\nC2 = =A2*2\nC3 = =A1*2\nC4 = =A4*2\nC5 = =A5*2\n");
    auto dev = detect_all(w);
    bool warned_c3 = false;
    for (const auto& f : dev)
        if (f.rule == 4 && f.severity == Severity::Warn && f.location() == "C3") warned_c3 = true;
    CHECK(warned_c3);

    // the relative-rate block: one region finding suggesting a master formula fix
    auto disc = detect_all(load_fixture("discount.gridbook"));
    REQUIRE(count_rule(disc, 4) == 1);
    for (const auto& f : disc)
        if (f.rule == 4) {
            CHECK(f.location() == "C2:C5");
            CHECK(f.suggestion == "R5");
        }
}

TEST_CASE("lint output is byte-stable and deterministic") {
    for (const char* name : {"lookup_guard.gridbook", "discount.gridbook", "smells/s4_pos.gridbook"}) {
        Workbook wb = load_fixture(name);
        CHECK(render(detect_all(wb)) == render(detect_all(wb)));
    }
    // findings arrive sorted by rule, sheet, position
    auto fs = detect_all(load_fixture("smells/s4_pos.gridbook"));
    for (size_t i = 1; i < fs.size(); ++i) {
        REQUIRE(fs[i - 1].rule <= fs[i].rule);
        if (fs[i - 1].rule == fs[i].rule && ci_equal(fs[i - 1].sheet, fs[i].sheet))
            REQUIRE(std::tie(fs[i - 1].row1, fs[i - 1].col1) <= std::tie(fs[i].row1, fs[i].col1));
    }
}

TEST_CASE("rule partition between duplication and lookup fanout") {
    auto fs = detect_all(load_fixture("smells/s8_neg.gridbook"));
    CHECK(count_rule(fs, 8) == 0);
    CHECK(count_rule(fs, 1) >= 1);  // the same-column pair is duplication
    auto pos = detect_all(load_fixture("smells/s8_pos.gridbook"));
    REQUIRE(count_rule(pos, 8) == 1);
    for (const auto& f : pos)
        if (f.rule == 8) CHECK(f.suggestion == "R6");
}

TEST_CASE("threshold monotonicity under half and double sweeps") {
    struct Knob {
        int rule;
        int LintConfig::* field;
    };
    const Knob knobs[] = {{2, &LintConfig::long_formula_nodes},
                          {1, &LintConfig::dup_min_nodes},
                          {10, &LintConfig::envy_min_refs},
                          {11, &LintConfig::clump_min_size},
                          {11, &LintConfig::clump_min_uses}};
    const char* fixtures[] = {"lookup_guard.gridbook",        "discount.gridbook",        "smells/s1_pos.gridbook",
                              "smells/s2_pos.gridbook",   "smells/s10_pos.gridbook",  "smells/s11_pos.gridbook",
                              "smells/s4_pos.gridbook",   "smells/s8_pos.gridbook"};
    for (const auto& knob : knobs) {
        for (const char* name : fixtures) {
            Workbook wb = load_fixture(name);
            LintConfig cfg;
            int base = cfg.*(knob.field);
            int prev = INT_MAX;
            for (int t : {base / 2, base, base + base / 2}) {
                if (t < 1) t = 1;
                LintConfig c;
                c.*(knob.field) = t;
                int n = count_rule(detect_all(wb, c), knob.rule);
                INFO(name << " rule S" << knob.rule << " threshold " << t);
                REQUIRE(n <= prev);
                prev = n;
            }
        }
    }
}

TEST_CASE("rule selection") {
    LintConfig cfg;
    cfg.rules_enabled = {3};
    auto fs = detect_all(load_fixture("lookup_guard.gridbook"), cfg);
    for (const auto& f : fs) REQUIRE(f.rule == 3);
    cfg.rules_enabled = {};
    CHECK(detect_all(load_fixture("lookup_guard.gridbook"), cfg).empty());
    CHECK(detect_all(Workbook{}).empty());
}

TEST_CASE("finding locations always point at existing cells or regions inside the sheet") {
    for (const char* name : {"lookup_guard.gridbook", "discount.gridbook", "smells/s4_pos.gridbook",
                             "smells/s9_pos.gridbook", "smells/s11_pos.gridbook"}) {
        Workbook wb = load_fixture(name);
        for (const auto& f : detect_all(wb)) {
            REQUIRE(wb.find_sheet(f.sheet) != nullptr);
            REQUIRE(f.col1 >= 1);
            REQUIRE(f.row1 >= 1);
            REQUIRE(f.col1 <= f.col2);
            REQUIRE(f.row1 <= f.row2);
        }
    }
}
