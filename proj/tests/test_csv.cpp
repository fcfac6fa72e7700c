#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"
#include "support.hpp"

using namespace neuron_margins;
using testsupport::TempDir;
using testsupport::write_text;

TEST_CASE("read_file splits cells and tracks 1-based line numbers") {
    TempDir dir;
    auto path = dir / "t.csv";
    write_text(path, "image_id,n0,n1\nimg1,0.5,0.0\nimg2,1.25,3\n");
    csv::Table t = csv::read_file(path);
    CHECK(t.header.cells == std::vector<std::string>{"image_id", "n0", "n1"});
    CHECK(t.header.line == 1);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].cells == std::vector<std::string>{"img1", "0.5", "0.0"});
    CHECK(t.rows[1].line == 3);
}

TEST_CASE("comment and blank lines are skipped but still count for numbering") {
    TempDir dir;
    auto path = dir / "t.csv";
    write_text(path, "# generated by hand\n\nimage_id,n0\n# mid-file note\nimg1,2\n");
    csv::Table t = csv::read_file(path);
    CHECK(t.header.line == 3);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].line == 5);
}

TEST_CASE("quoted cells keep commas and doubled quotes") {
    TempDir dir;
    auto path = dir / "t.csv";
    write_text(path, "a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n");
    csv::Table t = csv::read_file(path);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].cells[0] == "x, y");
    CHECK(t.rows[0].cells[1] == "he said \"hi\"");
}

TEST_CASE("CRLF endings are tolerated") {
    TempDir dir;
    auto path = dir / "t.csv";
    write_text(path, "a,b\r\n1,2\r\n");
    csv::Table t = csv::read_file(path);
    CHECK(t.header.cells == std::vector<std::string>{"a", "b"});
    CHECK(t.rows[0].cells == std::vector<std::string>{"1", "2"});
}

TEST_CASE("unterminated quote raises ParseError with position") {
    TempDir dir;
    auto path = dir / "t.csv";
    write_text(path, "a,b\n\"oops,2\n");
    CHECK_THROWS_AS(csv::read_file(path), ParseError);
    try {
        csv::read_file(path);
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.path() == path.string());
    }
}

TEST_CASE("missing file raises with the path in the message") {
    CHECK_THROWS_WITH_AS(csv::read_file("/nonexistent/nope.csv"),
                         doctest::Contains("/nonexistent/nope.csv"), ParseError);
}

TEST_CASE("join_row quotes exactly the cells that need it") {
    CHECK(csv::join_row({"plain", "with,comma", "with\"quote", "multi\nline"}) ==
          "plain,\"with,comma\",\"with\"\"quote\",\"multi\nline\"\n");
    CHECK(csv::join_row({"a", "b"}) == "a,b\n");
}

TEST_CASE("join_row / read_file round-trips arbitrary cells") {
    TempDir dir;
    auto path = dir / "t.csv";
    std::vector<std::string> cells{"id,1", "he said \"go\"", " spaced ", "", "last"};
    write_text(path, csv::join_row({"c1", "c2", "c3", "c4", "c5"}) + csv::join_row(cells));
    csv::Table t = csv::read_file(path);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].cells == cells);
}

TEST_CASE("parse_double accepts plain decimals and rejects garbage") {
    CHECK(csv::parse_double("0.5", "p", 1) == 0.5);
    CHECK(csv::parse_double(" 2.25 ", "p", 1) == 2.25);
    CHECK(csv::parse_double("1e-3", "p", 1) == 0.001);
    CHECK_THROWS_AS(csv::parse_double("", "p", 7), ParseError);
    CHECK_THROWS_AS(csv::parse_double("0.5x", "p", 7), ParseError);
    CHECK_THROWS_AS(csv::parse_double("1,5", "p", 7), ParseError);
    try {
        csv::parse_double("abc", "p", 42);
    } catch (const ParseError& e) {
        CHECK(e.line() == 42);
    }
}

TEST_CASE("parse_int is strict about integersness") {
    CHECK(csv::parse_int("12", "p", 1) == 12);
    CHECK(csv::parse_int("-3", "p", 1) == -3);
    CHECK_THROWS_AS(csv::parse_int("1.5", "p", 1), ParseError);
    CHECK_THROWS_AS(csv::parse_int("", "p", 1), ParseError);
}

TEST_CASE("format_double emits shortest round-trip text") {
    for (double v : {0.0, 0.5, 1.0 / 3.0, 0.1, 123456.789, 1e-7, 4.25, 1e300, -2.5}) {
        std::string s = csv::format_double(v);
        CHECK(csv::parse_double(s, "p", 1) == v);
    }
    CHECK(csv::format_double(0.5) == "0.5");
    CHECK(csv::format_double(4.0) == "4");
}
