#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "irqsym/error.hpp"
#include "irqsym/expr.hpp"

using namespace irqsym;

namespace {
Expr C(uint32_t v) { return Expr::constant(v); }
Expr V(const std::string& n, Origin o = Origin::GLOBAL) { return Expr::var(n, o); }
}  // namespace

TEST_CASE("simplify examples") {
  CHECK(simplify(Expr::raw(ExprOp::And, {C(0xFF), C(0x20)})) == C(0x20));
  CHECK(simplify(Expr::raw(ExprOp::Xor, {V("v"), V("v")})) == C(0));
  CHECK(simplify(Expr::raw(ExprOp::Add, {V("v"), C(0)})) == V("v"));
  CHECK(simplify(Expr::raw(ExprOp::And, {V("v"), C(0)})) == C(0));
  CHECK(simplify(Expr::raw(ExprOp::Or, {V("v"), C(0)})) == V("v"));
}

TEST_CASE("eval examples") {
  CHECK(eval(Expr::raw(ExprOp::Add, {C(0xFFFFFFFF), C(1)}), {}) == 0);
  CHECK(eval(band(V("sr", Origin::SR), C(0x20)), {{"sr", 0x25}}) == 0x20);
  try {
    eval(V("g"), {});
    FAIL("expected UnboundVariable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnboundVariable);
  }
  CHECK(eval(Expr::raw(ExprOp::Shl, {C(1), C(33)}), {}) == 2);
  CHECK(eval(Expr::raw(ExprOp::Shr, {C(0x80000000u), C(63)}), {}) == 1);
  CHECK(eval(Expr::raw(ExprOp::Slt, {C(0xFFFFFFFFu), C(0)}), {}) == 1);
  CHECK(eval(Expr::raw(ExprOp::Ult, {C(0xFFFFFFFFu), C(0)}), {}) == 0);
}

TEST_CASE("structural sharing and hashing") {
  Expr a = add(V("x"), C(1));
  Expr b = add(V("x"), C(1));
  CHECK(a == b);
  CHECK(a.hash() == b.hash());
  CHECK(add(add(V("x"), C(1)), C(2)) == add(V("x"), C(3)));
  CHECK(to_prefix(add(V("old@0x20000000"), C(1))) == "(add old@0x20000000 0x1)");
}

TEST_CASE("substitute and variable queries") {
  Expr e = add(V("a"), band(V("b", Origin::DR), C(0xF)));
  CHECK(substitute(e, Model{{"a", 1}, {"b", 0x13}}) == C(4));
  CHECK(substitute(e, Model{{"a", 1}}).has_vars());
  auto fv = free_vars(e);
  CHECK(fv.size() == 2);
  CHECK(fv.at("b").origin == Origin::DR);
  CHECK(mentions(e, "a"));
  CHECK_FALSE(mentions(e, "c"));
  CHECK(mentions_origin(e, Origin::DR));
  CHECK_FALSE(mentions_origin(e, Origin::SR));
}

TEST_CASE("mask tests are recovered from branch conditions") {
  Expr sr = V("sr@0x40000300", Origin::SR);
  std::map<std::string, uint32_t> masks;
  collect_mask_tests(eq(band(sr, C(0x20)), C(0)), masks);
  collect_mask_tests(ne(band(sr, C(0x80)), C(0)), masks);
  CHECK(masks.at("sr@0x40000300") == 0xA0);
}

TEST_CASE("property: simplify preserves semantics") {
  std::mt19937 rng(11);
  std::vector<Expr> leaves{V("x"), V("y"), V("z")};
  for (int i = 0; i < 5000; ++i) {
    Expr e = testgen::random_expr(rng, 6, leaves);
    Model m{{"x", static_cast<uint32_t>(rng())}, {"y", static_cast<uint32_t>(rng() % 40)}, {"z", static_cast<uint32_t>(rng())}};
    if (rng() % 4 == 0) m["x"] = m["y"];
    REQUIRE(eval(simplify(e), m) == eval(e, m));
  }
}

TEST_CASE("property: builders agree with raw evaluation") {
  std::mt19937 rng(12);
  std::vector<Expr> leaves{V("x"), V("y")};
  for (int i = 0; i < 5000; ++i) {
    Expr raw = testgen::random_expr(rng, 5, leaves);
    Expr built = raw.kids().empty() ? raw : build(raw.op(), raw.kids());
    Model m{{"x", static_cast<uint32_t>(rng())}, {"y", static_cast<uint32_t>(rng())}};
    REQUIRE(eval(built, m) == eval(raw, m));
    REQUIRE(eval(logical_not(raw), m) == (eval(raw, m) == 0 ? 1u : 0u));
  }
}

TEST_CASE("mul_const") {
  std::mt19937 rng(3);
  for (int i = 0; i < 1000; ++i) {
    uint32_t k = static_cast<uint32_t>(rng());
    uint32_t x = static_cast<uint32_t>(rng());
    CHECK(eval(mul_const(V("x"), k), {{"x", x}}) == k * x);
  }
}
