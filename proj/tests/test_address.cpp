#include <catch2/catch_amalgamated.hpp>

#include "gridbook/address.hpp"

using namespace gridbook;

// independent base-26 (bijective) column rendering used as the oracle
static std::string oracle_letters(int col) {
    std::string out;
    while (col > 0) {
        int rem = (col - 1) % 26;
        out.insert(out.begin(), char('A' + rem));
        col = (col - 1) / 26;
    }
    return out;
}

TEST_CASE("column letters match the bijective base-26 oracle") {
    CHECK(column_letters(1) == "A");
    CHECK(column_letters(26) == "Z");
    CHECK(column_letters(27) == "AA");
    CHECK(column_letters(702) == "ZZ");
    CHECK(column_letters(703) == "AAA");
    CHECK(column_letters(16384) == "XFD");
    for (int col = 1; col <= 16384; ++col) {
        REQUIRE(column_letters(col) == oracle_letters(col));
        REQUIRE(parse_column(column_letters(col)) == col);
    }
}

TEST_CASE("a1 parsing") {
    auto p = parse_a1("B2");
    REQUIRE(p);
    CHECK(p->col == 2);
    CHECK(p->row == 2);
    CHECK(parse_a1("XFD1048576"));
    CHECK_FALSE(parse_a1("XFE1"));
    CHECK_FALSE(parse_a1("A1048577"));
    CHECK_FALSE(parse_a1("A0"));
    CHECK_FALSE(parse_a1("A01"));
    CHECK_FALSE(parse_a1(""));
    CHECK_FALSE(parse_a1("1A"));
    CHECK_FALSE(parse_a1("A"));
}

TEST_CASE("defined-name validity") {
    CHECK(is_valid_name("DiscountRate"));
    CHECK(is_valid_name("Rate_1"));
    CHECK(is_valid_name("_x"));
    CHECK_FALSE(is_valid_name("A1"));       // shaped like an address
    CHECK_FALSE(is_valid_name("XFD1"));
    CHECK_FALSE(is_valid_name("1Rate"));
    CHECK_FALSE(is_valid_name(""));
    CHECK_FALSE(is_valid_name("a b"));
    CHECK(is_valid_name("LOG10") == false);  // also address-shaped
}

TEST_CASE("cell address ordering is sheet (case-folded), then row, then column") {
    CellAddress a{"S", 2, 1};
    CellAddress b{"S", 1, 2};
    CHECK(a < b);                        // row beats column
    CHECK(CellAddress{"a", 1, 1} < CellAddress{"B", 1, 1});
    CHECK(ci_equal("Sheet", "SHEET"));
    CHECK((CellAddress{"S", 3, 4}.a1()) == "C4");
    CHECK((CellAddress{"My Sheet", 1, 1}.full()) == "My Sheet!A1");
}
