#include <random>

#include "irqsym/nvic.hpp"
#include "testutil.hpp"

using namespace irqsym;

TEST_CASE("ctrl_write") {
  NvicState n;
  auto ev = n.ctrl_write(kIserOffset, 0x8);
  CHECK(n.line_enabled(3));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].line == 3);
  CHECK(n.ctrl_write(kIserOffset, 0x8).empty());
  CHECK(n.ctrl_write(kIcerOffset, 0x8).empty());
  CHECK_FALSE(n.line_enabled(3));
  CHECK_THROWS_KIND(n.ctrl_write(0x0, 1), ErrorKind::UnmappedControllerOffset);
  n.ctrl_write(kIsprOffset, 0x4);
  CHECK(n.pending == 0x4);
  CHECK(n.ctrl_read(kIsprOffset) == 0x4);
}

TEST_CASE("fire and dispatch") {
  NvicState n;
  CHECK_THROWS_KIND(n.fire(3, 0x20, {}), ErrorKind::LineNotEnabled);
  n.ctrl_write(kIserOffset, 0b1010);
  n.fire(3, 0x20, {0x41});
  n.fire(1, 0x2, {});
  CHECK_FALSE(n.next_dispatch(true));
  auto first = n.next_dispatch(false);
  REQUIRE(first);
  CHECK(*first == 1);
  n.finish_isr();
  auto second = n.next_dispatch(false);
  REQUIRE(second);
  CHECK(*second == 3);
  REQUIRE(n.active);
  CHECK(n.active->sr == 0x20u);
  CHECK(n.active->dr == std::deque<uint32_t>{0x41});
  n.finish_isr();
  CHECK_FALSE(n.next_dispatch(false));
}

TEST_CASE("enabled=0b1010, pending=0b1000 dispatches line 3") {
  NvicState n;
  n.enabled = 0b1010;
  n.pending = 0b1000;
  CHECK(n.next_dispatch(false) == 3);
}

TEST_CASE("forced firing on a disabled line") {
  NvicState n;
  n.fire(7, 0, {}, true);
  CHECK(n.next_dispatch(false) == 7);
}

TEST_CASE("property: LineEnabled emitted once per 0->1 transition") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    NvicState n;
    std::map<int, int> emitted, transitions;
    for (int i = 0; i < 50; ++i) {
      uint32_t v = static_cast<uint32_t>(rng()) & static_cast<uint32_t>(rng());
      if (rng() % 2) {
        uint32_t rising = v & ~n.enabled;
        for (int b = 0; b < 32; ++b)
          if ((rising >> b) & 1) ++transitions[b];
        for (auto& e : n.ctrl_write(kIserOffset, v)) ++emitted[e.line];
      } else {
        n.ctrl_write(kIcerOffset, v);
      }
    }
    REQUIRE(emitted == transitions);
  }
}
