#pragma once

// Drives a fixture along its single boot path with the symbolic engine.

#include <functional>

#include "doctest.h"
#include "irqsym/fixtures.hpp"
#include "irqsym/ident.hpp"
#include "irqsym/symexec.hpp"

namespace testdrive {

using Stop = std::function<bool(const irqsym::StepOutcome&, const irqsym::SymState&)>;

inline irqsym::SymState run_until(const irqsym::Fixture& f, const Stop& stop, int max_steps = 100000) {
  using namespace irqsym;
  uint64_t next_id = 1;
  ExecContext ctx;
  ctx.image = &f.unit.image;
  ctx.next_id = &next_id;
  SymState s = SymState::boot(f.unit.image, f.unit.layout);
  for (int i = 0; i < max_steps; ++i) {
    StepOutcome o = step_symbolic(ctx, s);
    REQUIRE(o.forks.empty());
    if (stop(o, s)) return s;
    REQUIRE_FALSE(s.halted);
  }
  FAIL("stop condition never reached");
  return s;
}

inline irqsym::SymState at_line_enabled(const irqsym::Fixture& f, int line) {
  return run_until(f, [line](const irqsym::StepOutcome& o, const irqsym::SymState&) {
    for (const auto& e : o.lines)
      if (e.line == line) return true;
    return false;
  });
}

inline irqsym::SymState at_pc(const irqsym::Fixture& f, const std::string& label) {
  const uint32_t pc = f.addr(label);
  return run_until(f, [pc](const irqsym::StepOutcome&, const irqsym::SymState& s) { return s.pc == pc; });
}

}  // namespace testdrive

namespace testdrive {

/// Like run_until, feeding controller and CR events to `id` as they occur.
inline irqsym::SymState run_identified(const irqsym::Fixture& f, irqsym::InterruptIdentifier& id, const Stop& stop,
                                       const std::set<uint32_t>* leaders = nullptr, int max_steps = 100000) {
  using namespace irqsym;
  uint64_t next_id = 1;
  ExecContext ctx;
  ctx.image = &f.unit.image;
  ctx.next_id = &next_id;
  ctx.leaders = leaders;
  SymState s = SymState::boot(f.unit.image, f.unit.layout);
  for (int i = 0; i < max_steps; ++i) {
    if (stop(StepOutcome{}, s)) return s;
    StepOutcome o = step_symbolic(ctx, s);
    REQUIRE(o.forks.empty());
    for (const auto& e : o.lines) id.on_trigger(e, s);
    for (const auto& e : o.cr_bits) id.on_trigger(e, s);
    REQUIRE_FALSE(s.halted);
  }
  FAIL("stop condition never reached");
  return s;
}

inline Stop at(const irqsym::Fixture& f, const std::string& label) {
  const uint32_t pc = f.addr(label);
  return [pc](const irqsym::StepOutcome&, const irqsym::SymState& s) { return s.pc == pc; };
}

}  // namespace testdrive
