#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "irqsym/error.hpp"
#include "irqsym/solver.hpp"

using namespace irqsym;

namespace {
Expr C(uint32_t v) { return Expr::constant(v); }
Expr V(const std::string& n) { return Expr::var(n, Origin::GLOBAL); }
}  // namespace

TEST_CASE("solve examples") {
  Expr sr = Expr::var("sr", Origin::SR);
  SUBCASE("RXNE set, TXE clear") {
    auto r = solve({ne(band(sr, C(0x20)), C(0)), eq(band(sr, C(0x80)), C(0))});
    REQUIRE(r.sat);
    CHECK((r.model.at("sr") & 0x20) != 0);
    CHECK((r.model.at("sr") & 0x80) == 0);
  }
  SUBCASE("contradiction") {
    Expr v = V("v");
    CHECK_FALSE(solve({eq(band(v, C(1)), C(0)), ne(band(v, C(1)), C(0))}).sat);
  }
  SUBCASE("ground constraint after substitution") {
    Expr g = V("g");
    Expr c = substitute(eq(g, C(4)), std::map<std::string, Expr>{{"g", Expr::raw(ExprOp::Add, {C(1), C(3)})}});
    CHECK(solve({c}).sat);
  }
  SUBCASE("shifts by symbolic amounts") {
    Expr x = V("x"), s = V("s");
    auto r = solve({eq(shl(x, s), C(0x80)), eq(band(x, C(0xFFFFFFF0u)), C(0)), ult(C(5), s)});
    REQUIRE(r.sat);
    CHECK((r.model.at("x") << (r.model.at("s") & 31)) == 0x80);
  }
}

TEST_CASE("solve_minimal picks the fewest-bits witness") {
  Expr sr = Expr::var("sr", Origin::SR);
  auto m = solve_minimal({ne(band(sr, C(0xF)), C(0)), eq(band(sr, C(0x1)), C(0))}, "sr");
  REQUIRE(m);
  CHECK(m->at("sr") == 0x2);
  auto none = solve_minimal({eq(sr, C(1)), eq(sr, C(2))}, "sr");
  CHECK_FALSE(none);
  auto any = solve_minimal({ult(C(0x10), sr)}, "sr");
  REQUIRE(any);
  CHECK(any->at("sr") == 0x20);
}

TEST_CASE("enumerate_values") {
  Expr t = V("t");
  auto vals = enumerate_values({ult(t, C(3))}, add(t, C(0x100)), 8);
  std::sort(vals.begin(), vals.end());
  CHECK(vals == std::vector<uint32_t>{0x100, 0x101, 0x102});
  CHECK(enumerate_values({ult(t, C(100))}, t, 8).size() == 8);
}

TEST_CASE("budget exhaustion is distinct from UNSAT") {
  // Factoring-style query that cannot finish in a handful of steps.
  Expr a = V("a"), b = V("b");
  std::vector<Expr> cs{eq(add(mul_const(a, 3), shl(b, C(7))), C(0x12345677)), ne(a, C(0)), ult(C(100), b)};
  try {
    solve(cs, 5);
    FAIL("expected budget exhaustion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SolverBudgetExhausted);
  }
}

TEST_CASE("emit_smtlib") {
  Expr v = V("v");
  std::string s = emit_smtlib({ne(band(v, C(1)), C(0))});
  CHECK(s.find("(assert (distinct (bvand v #x00000001) #x00000000))") != std::string::npos);
  CHECK(s.find("(check-sat)") != std::string::npos);
  std::string empty = emit_smtlib({});
  CHECK(empty.find("declare-const") == std::string::npos);
  CHECK(empty.find("(check-sat)") != std::string::npos);
  std::string two = emit_smtlib({ult(V("a"), V("b"))});
  size_t count = 0;
  for (size_t p = two.find("declare-const"); p != std::string::npos; p = two.find("declare-const", p + 1)) ++count;
  CHECK(count == 2);
}

TEST_CASE("property: solve agrees with exhaustive enumeration") {
  std::mt19937 rng(2024);
  int sat = 0;
  for (int i = 0; i < 300; ++i) {
    auto q = testgen::random_small_query(rng);
    auto r = testgen::check_small_query(q);
    CAPTURE(r.detail);
    CHECK(r.agree);
    sat += r.sat;
  }
  CHECK(sat > 30);
  CHECK(sat < 270);
}
