#include <random>

#include "irqsym/assembler.hpp"
#include "irqsym/fixtures.hpp"
#include "irqsym/symexec.hpp"
#include "testutil.hpp"

using namespace irqsym;

namespace {

Expr C(uint32_t v) { return Expr::constant(v); }

struct Harness {
  FirmwareImage image;
  uint64_t next_id = 1;
  ExecContext ctx() {
    ExecContext c;
    c.image = &image;
    c.next_id = &next_id;
    return c;
  }
};

// Forward-branching random programs over r1..r6 with RAM traffic via r7.
std::string random_program(std::mt19937& rng, int len) {
  static const char* alu[] = {"ADD", "SUB", "AND", "OR", "XOR", "SHL", "SHR"};
  static const char* br[] = {"BEQ", "BNE", "BLT", "BGE"};
  std::string src = ".reset s\ns:\nLDI r7, 0x20000000\n";
  auto reg = [&] { return "r" + std::to_string(1 + rng() % 6); };
  for (int i = 0; i < len; ++i) {
    src += "L" + std::to_string(i) + ":\n";
    switch (rng() % 6) {
      case 0:
      case 1:
        src += std::string(alu[rng() % 7]) + " " + reg() + ", " + reg() + ", " + reg() + "\n";
        break;
      case 2:
        src += "MOV " + reg() + ", " + reg() + ", " + std::to_string(static_cast<int>(rng() % 200) - 100) + "\n";
        break;
      case 3:
        src += "ST " + reg() + ", [r7, " + std::to_string(4 * (rng() % 8)) + "]\n";
        break;
      case 4:
        src += "LD " + reg() + ", [r7, " + std::to_string(4 * (rng() % 8)) + "]\n";
        break;
      default: {
        int target = i + 1 + static_cast<int>(rng() % 4);
        std::string label = target >= len ? "end" : "L" + std::to_string(target);
        src += std::string(br[rng() % 4]) + " " + reg() + ", " + reg() + ", " + label + "\n";
      }
    }
  }
  return src + "end:\nHALT\n";
}

}  // namespace

TEST_CASE("property: every explored path replays concretely") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    Harness h;
    h.image = assemble(random_program(rng, 24));
    SymState entry = SymState::boot(h.image);
    for (int r = 1; r <= 3; ++r) entry.regs[r] = Expr::var("x" + std::to_string(r), Origin::GLOBAL);
    auto ps = explore(h.ctx(), entry, {StopWhen::Kind::StepBudget, 1000});
    REQUIRE(ps.live.empty());
    for (const auto& t : ps.terminated) {
      REQUIRE(t.reason == StopReason::Halted);
      const SymState& s = t.state;
      Model m = s.witness;
      for (int r = 1; r <= 3; ++r) m.try_emplace("x" + std::to_string(r), 0);
      for (const auto& c : s.path_condition) REQUIRE(eval(c, m) != 0);
      MachineState ms = MachineState::boot(h.image);
      for (int r = 1; r <= 3; ++r) ms.regs[r] = m.at("x" + std::to_string(r));
      auto run = run_steps(h.image, ms, {}, 1000);
      REQUIRE(run.halted);
      for (int r = 0; r < kNumRegs; ++r) REQUIRE(eval(s.regs[r], m) == run.final_state.regs[r]);
      for (const auto& [a, v] : s.mem) REQUIRE(eval(v, m) == run.final_state.ram_word(a));
      REQUIRE(run.final_state.steps == s.steps);
    }
  }
}

TEST_CASE("fork on a symbolic comparison") {
  Harness h;
  h.image = assemble(".reset s\ns:\nLDI r2, 4\nBEQ r1, r2, yes\nHALT\nyes:\nHALT\n");
  SymState s = SymState::boot(h.image);
  s.regs[1] = Expr::var("g", Origin::GLOBAL);
  auto ps = explore(h.ctx(), s, {StopWhen::Kind::StepBudget, 100});
  REQUIRE(ps.terminated.size() == 2);
  std::set<uint32_t> g_values;
  for (auto& t : ps.terminated) g_values.insert(t.state.concrete_value(Expr::var("g", Origin::GLOBAL)));
  CHECK(g_values.count(4) == 1);
}

TEST_CASE("concrete branch has one successor") {
  Harness h;
  h.image = assemble(".reset s\ns:\nLDI r1, 4\nLDI r2, 4\nBEQ r1, r2, yes\nHALT\nyes:\nHALT\n");
  auto ps = explore(h.ctx(), SymState::boot(h.image), {StopWhen::Kind::StepBudget, 100});
  REQUIRE(ps.terminated.size() == 1);
  CHECK(ps.terminated[0].state.pc == assemble_unit(".reset s\ns:\nLDI r1, 4\nLDI r2, 4\nBEQ r1, r2, yes\nHALT\nyes:\nHALT\n").symbol("yes"));
}

TEST_CASE("infeasible branch sides are dropped") {
  Harness h;
  h.image = assemble(
      ".reset s\ns:\nLDI r3, 1\nAND r2, r1, r3\nBNE r2, r0, odd\nBNE r2, r0, never\nHALT\nodd:\nHALT\nnever:\nHALT\n");
  SymState s = SymState::boot(h.image);
  s.regs[1] = Expr::var("v", Origin::GLOBAL);
  auto ps = explore(h.ctx(), s, {StopWhen::Kind::StepBudget, 100});
  CHECK(ps.terminated.size() == 2);
}

TEST_CASE("straight-line three-block function is one path") {
  Harness h;
  h.image = assemble(".reset s\ns:\nCALL f\nHALT\nf:\nMOV r1, r1, 1\nJ g\ng:\nMOV r1, r1, 2\nJ k\nk:\nRET\n");
  SymState s = SymState::boot(h.image);
  s.regs[1] = Expr::var("a", Origin::GLOBAL);
  auto ps = explore(h.ctx(), s, {StopWhen::Kind::StepBudget, 100});
  REQUIRE(ps.terminated.size() == 1);
  CHECK(ps.terminated[0].state.path_condition.empty());
}

TEST_CASE("bb budget bounds every live path") {
  Harness h;
  h.image = assemble(".reset s\ns:\nloop:\nMOV r1, r1, -1\nBNE r1, r0, loop\nHALT\n");
  SymState s = SymState::boot(h.image);
  s.regs[1] = Expr::var("n", Origin::GLOBAL);
  auto ps = explore(h.ctx(), s, {StopWhen::Kind::BbBudget, 30});
  REQUIRE_FALSE(ps.live.empty());
  for (auto& p : ps.live) CHECK(p.bb_count == 30);
}

TEST_CASE("concretize") {
  SymState s;
  Expr g = Expr::var("g", Origin::GLOBAL);
  s.path_condition = {ult(g, C(3)), ne(g, C(0))};
  uint32_t v = concretize(s, g);
  // Oracle: brute-force the small domain.
  std::set<uint32_t> allowed;
  for (uint32_t w = 0; w < 8; ++w)
    if (w < 3 && w != 0) allowed.insert(w);
  CHECK(allowed.count(v) == 1);
  CHECK(s.path_condition.size() == 3);
  CHECK(solve(s.path_condition).model.at("g") == v);

  SymState t;
  CHECK(concretize(t, C(7)) == 7);
  CHECK(t.path_condition.empty());

  SymState u;
  Expr x = Expr::var("x", Origin::GLOBAL);
  u.path_condition = {eq(band(x, C(1)), C(0)), ne(band(x, C(1)), C(0))};
  CHECK_THROWS_KIND(concretize(u, x), ErrorKind::Unsatisfiable);
}

TEST_CASE("boot-scope runs agree with the concrete interpreter on every fixture") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    Fixture f = fixture(name);
    Harness h;
    h.image = f.unit.image;
    ExecContext ctx = h.ctx();
    ctx.scope = Scope::BOOT;
    SymState s = SymState::boot(h.image, f.unit.layout);
    MachineState m = MachineState::boot(h.image, f.unit.layout);
    for (int i = 0; i < 3000 && !m.halted; ++i) {
      std::optional<ErrorKind> ce, se;
      try {
        step_concrete(h.image, m);
      } catch (const Error& e) {
        ce = e.kind();
      }
      try {
        auto out = step_symbolic(ctx, s);
        REQUIRE(out.forks.empty());
      } catch (const Error& e) {
        se = e.kind();
      }
      REQUIRE(ce == se);
      if (ce) break;
      REQUIRE(s.pc == m.pc);
      for (int r = 0; r < kNumRegs; ++r) REQUIRE(s.concrete_value(s.regs[r]) == m.regs[r]);
    }
  }
}
