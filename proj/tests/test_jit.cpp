#include <random>

#include "drive.hpp"
#include "irqsym/cfg.hpp"
#include "irqsym/fixtures.hpp"
#include "irqsym/jit.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace irqsym;

namespace {

struct Prepared {
  Fixture f;
  Cfg cfg;
  std::set<uint32_t> leaders;
  GlobalRegion region;
  std::unique_ptr<InterruptIdentifier> id;
  SymState state;
  JitConfig jit;
};

/// Boots `name` with identification running and stops at `label`.
std::unique_ptr<Prepared> prepare(const std::string& name, const std::string& label) {
  auto p = std::make_unique<Prepared>();
  p->f = fixture(name);
  p->cfg = build_cfg(p->f.unit.image);
  p->leaders = p->cfg.block_starts();
  p->region = locate_global_region(p->f.unit.image, p->f.unit.layout);
  IdentConfig ic;
  ic.leaders = &p->leaders;
  p->id = std::make_unique<InterruptIdentifier>(p->f.unit.image, p->region, ic);
  p->state = testdrive::run_identified(p->f, *p->id, testdrive::at(p->f, label), &p->leaders);
  p->jit.leaders = &p->leaders;
  return p;
}

std::set<uint32_t> union_blocks(const std::vector<LocalPath>& ps) {
  std::set<uint32_t> u;
  for (const auto& p : ps) u.insert(p.new_blocks.begin(), p.new_blocks.end());
  return u;
}

}  // namespace

TEST_CASE("site detection") {
  auto p = prepare("delay-boot", "delay_wait");
  SiteRegistry reg;
  auto site = detect_site(p->state, p->f.unit.image, p->id->table(), reg);
  REQUIRE(site);
  CHECK(site->pc == p->f.addr("delay_wait"));
  CHECK(site->var_addr == p->f.addr("uwTick"));
  CHECK(site->occurrence == 1);
  CHECK(detect_site(p->state, p->f.unit.image, p->id->table(), reg)->occurrence == 2);

  SymState untabled = p->state;
  untabled.regs[4] = Expr::constant(p->f.addr("config"));
  CHECK_FALSE(detect_site(untabled, p->f.unit.image, p->id->table(), reg));
}

TEST_CASE("delay loop: two local paths, five ticks, loop exits") {
  auto p = prepare("delay-boot", "delay_wait");
  SiteRegistry reg;
  FiringSite site = *detect_site(p->state, p->f.unit.image, p->id->table(), reg);
  std::set<uint32_t> coverage(p->state.blocks.begin(), p->state.blocks.end());
  auto paths = local_explore(p->f.unit.image, site, p->state, coverage, p->jit);
  REQUIRE(paths.size() == 2);
  auto kept = prune(paths);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].new_blocks.count(p->f.addr("post_delay")) == 1);
  CHECK(union_blocks(kept) == union_blocks(paths));

  InterruptSequence seq = infer_sequence(kept[0], site, p->id->table(), p->state, p->jit);
  CHECK(seq.firings.size() == static_cast<size_t>(p->f.truth.sequences.at("delay_wait")));
  CHECK(seq.pattern == Pattern::SELF_REFERRAL);
  for (const auto& f : seq.firings) CHECK(f.line == 0);

  FireResult fired = fire_sequence(p->f.unit.image, seq, site, kept[0], p->state, p->jit);
  CHECK(fired.state.schedule.size() == 5);
  // Oracle: the concrete machine continues from the fired state to boot_done.
  auto run = run_steps(p->f.unit.image, to_machine(concretized(fired.state)), {}, 1000);
  CHECK(run.halted);
  CHECK(run.final_state.ram_word(p->f.addr("booted")) == 1);

  // Without the firings the loop never exits.
  auto stuck = run_steps(p->f.unit.image, to_machine(concretized(p->state)), {}, 5000);
  CHECK_FALSE(stuck.halted);
}

TEST_CASE("empty sequence when the current value already fits") {
  auto p = prepare("delay-boot", "delay_wait");
  SiteRegistry reg;
  FiringSite site = *detect_site(p->state, p->f.unit.image, p->id->table(), reg);
  LocalPath lp;
  const Expr g = Expr::var(global_var_name(site.var_addr), Origin::GLOBAL, site.var_addr);
  lp.constraints = {eq(g, Expr::constant(0))};
  InterruptSequence seq = infer_sequence(lp, site, p->id->table(), p->state, p->jit);
  CHECK(seq.firings.empty());
  FireResult fired = fire_sequence(p->f.unit.image, seq, site, lp, p->state, p->jit);
  CHECK(fired.state.skip_site_pc == site.pc);
  CHECK(fired.state.steps == p->state.steps);
}

TEST_CASE("data reception: one firing carrying the wanted payload") {
  auto p = prepare("uart-isr", "wait_rx");
  const uint32_t rx = p->f.addr("rx_data");
  FiringSite site{p->state.pc, rx, 1};
  LocalPath lp;
  const Expr g = Expr::var(global_var_name(rx), Origin::GLOBAL, rx);
  lp.constraints = {eq(g, Expr::constant(0x42))};
  InterruptSequence seq = infer_sequence(lp, site, p->id->table(), p->state, p->jit);
  REQUIRE(seq.firings.size() == 1);
  CHECK(seq.pattern == Pattern::DATA_RECEPTION);
  CHECK(seq.firings[0].dr == std::vector<uint32_t>{0x42});
  // Concrete replay of the firing.
  MachineState m = to_machine(concretized(p->state));
  fire_and_run_isr(p->f.unit.image, m, seq.firings[0].line, seq.firings[0].sr, seq.firings[0].dr);
  CHECK(m.ram_word(rx) == 0x42);
}

TEST_CASE("switch site: prune drops the fall-through path and keeps coverage") {
  auto p = prepare("prune-switch", "dispatch");
  p->state = testdrive::run_identified(p->f, *p->id, [&](const StepOutcome&, const SymState& s) {
    return s.pc == p->f.addr("dispatch") + 8;
  }, &p->leaders);
  SiteRegistry reg;
  auto site = detect_site(p->state, p->f.unit.image, p->id->table(), reg);
  REQUIRE(site);
  auto paths = local_explore(p->f.unit.image, *site, p->state, p->state.blocks, p->jit);
  CHECK(paths.size() == static_cast<size_t>(p->f.truth.local_paths.at("dispatch")));
  auto kept = prune(paths);
  CHECK(kept.size() < paths.size());
  CHECK(union_blocks(kept) == union_blocks(paths));

  // Each retained path's witness value, replayed concretely, reaches its blocks.
  for (const auto& lp : kept) {
    auto m = solve(lp.constraints);
    REQUIRE(m.sat);
    MachineState ms = to_machine(concretized(p->state));
    auto it = m.model.find(global_var_name(site->var_addr));
    ms.ram[site->var_addr] = it == m.model.end() ? 0 : it->second;
    std::set<uint32_t> pcs;
    run_steps(p->f.unit.image, ms, {}, 40, [&](const MachineState& x) {
      pcs.insert(x.pc);
      return false;
    });
    for (uint32_t b : lp.new_blocks) CHECK(pcs.count(b) == 1);
  }
}

TEST_CASE("prune examples") {
  auto lp = [](std::set<uint32_t> b) {
    LocalPath p;
    p.new_blocks = std::move(b);
    return p;
  };
  CHECK(prune({lp({1, 2}), lp({1})}).size() == 1);
  CHECK(prune({lp({1, 2}), lp({2, 3})}).size() == 2);
  CHECK(prune({lp({1}), lp({1})}).size() == 1);
}

TEST_CASE("stale record: post-fire mismatch") {
  auto p = prepare("stale-cr", "wait_ready");
  p->state = testdrive::run_identified(p->f, *p->id, [&](const StepOutcome&, const SymState& s) {
    return s.pc == p->f.addr("wait_ready") + 8;
  }, &p->leaders);
  SiteRegistry reg;
  auto site = detect_site(p->state, p->f.unit.image, p->id->table(), reg);
  REQUIRE(site);
  auto paths = prune(local_explore(p->f.unit.image, *site, p->state, p->state.blocks, p->jit));
  const LocalPath* exit = nullptr;
  for (const auto& lp : paths)
    if (lp.end == StopReason::Halted) exit = &lp;
  REQUIRE(exit);
  InterruptSequence seq = infer_sequence(*exit, *site, p->id->table(), p->state, p->jit);
  REQUIRE(seq.firings.size() == 1);
  CHECK_THROWS_KIND(fire_sequence(p->f.unit.image, seq, *site, *exit, p->state, p->jit), ErrorKind::PostFireMismatch);
  // Re-analysis under the current CR leaves nothing to fire.
  p->id->reanalyze(*p->f.truth.line, p->state);
  CHECK_FALSE(p->id->table().has(site->var_addr));
}

TEST_CASE("property: inferred k matches concrete brute force") {
  std::mt19937 rng(404);
  int solved = 0;
  for (int i = 0; i < 60; ++i) {
    auto in = oracle::random_linear_instance(rng);
    CAPTURE(in.describe());
    auto out = oracle::check_linear_instance(in);
    REQUIRE(out.table_ok);
    CHECK(out.inferred == out.brute_force);
    solved += out.inferred.has_value();
  }
  CHECK(solved > 10);
}
