#include <random>

#include "irqsym/assembler.hpp"
#include "irqsym/cfg.hpp"
#include "irqsym/fixtures.hpp"
#include "testutil.hpp"

using namespace irqsym;

TEST_CASE("branch and halt successors") {
  auto u = assemble_unit(".reset s\ns:\nMOV r1, r1, 1\nBEQ r1, r0, t\nNOP\nHALT\nt:\nHALT\n");
  Cfg g = build_cfg(u.image);
  const auto& b = g.blocks.at(u.symbol("s"));
  CHECK(b.succs.size() == 2);
  CHECK(g.blocks.at(u.symbol("t")).succs.empty());
  CHECK(g.block_of(u.symbol("t") + 0) == u.symbol("t"));
  CHECK(g.to_dot().rfind("digraph", 0) == 0);
}

TEST_CASE("JALR through an in-block LDI resolves") {
  Fixture f = fixture("jalr-ldi");
  REQUIRE(f.truth.jalr_target);
  Cfg g = build_cfg(f.unit.image);
  auto blk = g.block_of(f.addr(f.truth.jalr_target->first));
  REQUIRE(blk);
  const auto& b = g.blocks.at(*blk);
  CHECK_FALSE(b.unknown_succs);
  CHECK(std::count(b.succs.begin(), b.succs.end(), f.addr(f.truth.jalr_target->second)) == 1);
}

TEST_CASE("distance examples") {
  Cfg g;
  g.blocks[0xA] = {0xA, 0xB, {0xB}, false};
  g.blocks[0xB] = {0xB, 0xC, {0xC}, false};
  g.blocks[0xC] = {0xC, 0xD, {}, false};
  CHECK(distance_to_uncovered(g, 0xA, {}) == 0u);
  CHECK(distance_to_uncovered(g, 0xA, {0xA, 0xB}) == 2u);
  CHECK_FALSE(distance_to_uncovered(g, 0xA, {0xA, 0xB, 0xC}));
}

TEST_CASE("property: batched distances agree with single-source BFS") {
  std::mt19937 rng(8);
  for (const auto& name : fixture_names()) {
    Cfg g = build_cfg(fixture(name).unit.image);
    for (int trial = 0; trial < 20; ++trial) {
      std::set<uint32_t> covered;
      for (auto& [a, b] : g.blocks)
        if (rng() % 3) covered.insert(a);
      for (auto opt : {DistanceOptions{}, DistanceOptions{3u}}) {
        auto all = distances_to_uncovered(g, covered, opt);
        for (auto& [a, b] : g.blocks) {
          auto d = distance_to_uncovered(g, a, covered, opt);
          auto it = all.find(a);
          REQUIRE((it == all.end() ? std::optional<uint32_t>{} : std::optional<uint32_t>{it->second}) == d);
        }
      }
    }
  }
}
