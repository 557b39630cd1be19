#include "irqsym/assembler.hpp"
#include "irqsym/fixtures.hpp"
#include "irqsym/machine.hpp"
#include "testutil.hpp"

using namespace irqsym;

TEST_CASE("ALU step") {
  auto img = assemble(".reset s\ns:\nADD r1, r1, r2\nHALT\n");
  auto st = MachineState::boot(img);
  st.regs[1] = 2;
  st.regs[2] = 3;
  uint32_t pc = st.pc;
  step_concrete(img, st);
  CHECK(st.regs[1] == 5);
  CHECK(st.pc == pc + 4);
}

TEST_CASE("dispatch pushes a frame and IRET restores it") {
  auto u = assemble_unit(".reset s\n.vector 3, isr\ns:\nMOV r14, r0, 77\nSUB r1, r1, r1\nNOP\nHALT\nisr:\nMOV r8, r8, 1\nIRET\n");
  auto st = MachineState::boot(u.image);
  step_concrete(u.image, st);
  step_concrete(u.image, st);  // sets Z
  uint32_t sp = st.regs[kStackReg];
  uint32_t ret = st.pc;
  st.nvic.ctrl_write(kIserOffset, 1u << 3);
  st.nvic.fire(3, 0, {});
  auto ev = step_concrete(u.image, st);
  CHECK(ev.dispatched == 3);
  CHECK(st.in_isr);
  CHECK(st.regs[kStackReg] == sp - kFrameBytes);
  CHECK(st.ram_word(sp - 12) == ret);
  CHECK(st.ram_word(sp - 8) == 77);
  CHECK(st.ram_word(sp - 4) == pack_flags(true, false));
  CHECK(st.regs[8] == 1);
  st.z = false;
  st.regs[14] = 0;
  auto back = step_concrete(u.image, st);
  CHECK(back.isr_returned);
  CHECK_FALSE(st.in_isr);
  CHECK(st.pc == ret);
  CHECK(st.regs[14] == 77);
  CHECK(st.z);
  CHECK(st.regs[kStackReg] == sp);
}

TEST_CASE("IRET outside an ISR") {
  auto img = assemble(".reset s\ns:\nIRET\n");
  auto st = MachineState::boot(img);
  CHECK_THROWS_KIND(step_concrete(img, st), ErrorKind::IretOutsideIsr);
}

TEST_CASE("HALT-immediately image has a one-block trace") {
  auto img = assemble(".reset s\ns:\nHALT\n");
  auto run = run_concrete(img, {}, 10);
  CHECK(run.halted);
  CHECK(run.blocks.size() == 1);
}

TEST_CASE("delay-boot needs five ticks") {
  Fixture f = fixture("delay-boot");
  const auto& img = f.unit.image;
  CHECK_THROWS_KIND(run_concrete(img, {}, 20000), ErrorKind::StepBudgetExhausted);

  auto schedule_for = [](int n) {
    ConcreteInputs in;
    for (int i = 0; i < n; ++i) in.schedule.push_back({static_cast<uint64_t>(200 + 50 * i), 0, 0, {}});
    return in;
  };
  auto run = run_concrete(img, schedule_for(5), 20000);
  CHECK(run.halted);
  CHECK(run.final_state.ram_word(f.addr("booted")) == 1);
  CHECK(run.final_state.ram_word(f.addr("uwTick")) == 5);
  CHECK(std::count(run.blocks.begin(), run.blocks.end(), f.addr("post_delay")) == 1);

  CHECK_THROWS_KIND(run_concrete(img, schedule_for(4), 20000), ErrorKind::StepBudgetExhausted);
}

TEST_CASE("fire(0, 0x1) runs the tick handler once") {
  Fixture f = fixture("delay-boot");
  const auto& img = f.unit.image;
  auto st = run_steps(img, MachineState::boot(img), {}, 150).final_state;
  REQUIRE(st.nvic.line_enabled(0));
  uint32_t before = st.ram_word(f.addr("uwTick"));
  fire_and_run_isr(img, st, 0, 0x1, {});
  CHECK(st.ram_word(f.addr("uwTick")) == before + 1);
  CHECK_FALSE(st.in_isr);
}

TEST_CASE("uart RXNE firing takes the receive branch") {
  Fixture f = fixture("uart-isr");
  const auto& img = f.unit.image;
  auto st = run_steps(img, MachineState::boot(img, f.unit.layout), {}, 400).final_state;
  REQUIRE(st.nvic.line_enabled(3));
  fire_and_run_isr(img, st, 3, 0x20, {0x41});
  CHECK(st.ram_word(f.addr("rx_data")) == 0x41);
  CHECK(st.ram_word(f.addr("rx_count")) == 1);
}

TEST_CASE("firing a disabled line is rejected") {
  Fixture f = fixture("null-handler");
  auto st = MachineState::boot(f.unit.image, f.unit.layout);
  CHECK_THROWS_KIND(fire_and_run_isr(f.unit.image, st, 7, 0, {}), ErrorKind::LineNotEnabled);
}

TEST_CASE("oob-write faults only on the magic frame") {
  Fixture f = fixture("oob-write");
  const auto& img = f.unit.image;
  ConcreteInputs ok;
  ok.layout = f.unit.layout;
  ok.dr_values = {1, 2, 3, 4};
  CHECK(run_concrete(img, ok, 20000).halted);
  ConcreteInputs bad = ok;
  bad.dr_values = {1, 0xBEEF};
  try {
    run_concrete(img, bad, 20000);
    FAIL("expected MemoryFault");
  } catch (const MemoryFault& e) {
    CHECK(e.info().pc == f.addr("bad_store"));
  }
}
