#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "rerand/io.hpp"

using namespace rerand;
using namespace rerand::io;

namespace {

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

}  // namespace

TEST_CASE("csv parsing", "[io]") {
  const auto t = parse("id,age,\"income, usd\"\r\nu1, 30 ,1000\n\nu2,41,\"2000\"\n");
  REQUIRE(t.header == std::vector<std::string>{"id", "age", "income, usd"});
  REQUIRE(t.rows.size() == 2);
  REQUIRE(t.rows[1][2] == "2000");
}

TEST_CASE("csv errors", "[io]") {
  REQUIRE_THROWS_WITH(parse(""), Catch::Matchers::ContainsSubstring("empty CSV file"));
  REQUIRE_THROWS_WITH(parse("a,b\n"), Catch::Matchers::ContainsSubstring("no data rows"));
  REQUIRE_THROWS_WITH(parse("a,b\n1,2\n3\n"), Catch::Matchers::ContainsSubstring("ragged row at line 3"));
  REQUIRE_THROWS_AS(read_csv("/nonexistent/file.csv"), ValidationError);
}

TEST_CASE("covariate ingestion", "[io]") {
  SECTION("id column and values") {
    const auto d = covariates_from_table(parse("id,x1,x2\na,1,2\nb,3,4\nc,5,7\n"));
    REQUIRE(d.ids == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(d.x.k() == 2);
    REQUIRE(d.x.data()(2, 1) == 7.0);
    REQUIRE(d.x.column_names() == std::vector<std::string>{"x1", "x2"});
  }
  SECTION("non-numeric cell names row and column") {
    REQUIRE_THROWS_WITH(covariates_from_table(parse("x1,x2\n1,2\n3,abc\n")),
                        Catch::Matchers::ContainsSubstring("row 3") && Catch::Matchers::ContainsSubstring("x2"));
  }
  SECTION("interactions of two covariates give k = 3") {
    const auto d = covariates_from_table(parse("x1,x2\n1,2\n3,4\n5,7\n"), {"", false, true});
    REQUIRE(d.x.k() == 3);
    REQUIRE(d.x.data()(1, 2) == 12.0);
    REQUIRE(d.x.column_names()[2] == "x1*x2");
  }
  SECTION("squares") {
    const auto d = covariates_from_table(parse("x1,x2\n1,2\n3,4\n"), {"", true, false});
    REQUIRE(d.x.k() == 4);
    REQUIRE(d.x.data()(1, 3) == 16.0);
  }
  SECTION("missing id column") {
    REQUIRE_THROWS_AS(covariates_from_table(parse("x\n1\n2\n"), {"unit", false, false}), ValidationError);
  }
}

TEST_CASE("outcomes align by id", "[io]") {
  const auto y = outcomes_from_table(parse("id,y\nb,20\na,10\nc,30\n"), {"a", "b", "c"});
  REQUIRE(y == std::vector<double>{10, 20, 30});
  REQUIRE_THROWS_AS(outcomes_from_table(parse("id,y\nb,20\na,10\n"), {"a", "b", "c"}), ValidationError);
  REQUIRE_THROWS_AS(outcomes_from_table(parse("id,y\nb,20\nz,10\n"), {"a", "b"}), ValidationError);
}
