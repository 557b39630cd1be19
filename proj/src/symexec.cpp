#include "irqsym/symexec.hpp"

#include <deque>

#include "irqsym/error.hpp"

namespace irqsym {

bool GlobalRegion::contains(uint32_t addr) const {
  for (const auto& [lo, hi] : ranges) {
    if (addr >= lo && addr < hi) return true;
  }
  return false;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Returned: return "returned";
    case StopReason::BbBudget: return "bb-budget";
    case StopReason::StepBudget: return "step-budget";
    case StopReason::Halted: return "halted";
    case StopReason::Fault: return "fault";
    case StopReason::Error: return "error";
  }
  return "?";
}

SymState SymState::boot(const FirmwareImage& image, const PeripheralLayout& layout) {
  SymState s;
  s.pc = image.entry();
  s.regs[kStackReg] = Expr::constant(image.initial_sp());
  s.periph = PeripheralMap(image.map);
  s.periph.apply_layout(layout);
  return s;
}

Expr SymState::mem_value(uint32_t addr) const {
  auto it = mem.find(addr);
  return it == mem.end() ? Expr::constant(0) : it->second;
}

namespace {

Expr resolve(const SymState& s, const Expr& e) {
  if (!e.has_vars() || s.bindings.empty()) return e;
  return substitute(e, s.bindings);
}

/// Adds zero assignments for variables of `e` the witness does not cover.
/// Unconstrained variables can take any value, so the witness stays valid.
void extend_witness(SymState& s, const Expr& e) {
  for (const auto& [name, info] : free_vars(e)) {
    (void)info;
    s.witness.try_emplace(name, 0);
  }
}

uint32_t witness_eval(SymState& s, const Expr& resolved) {
  if (resolved.is_const()) return resolved.value();
  extend_witness(s, resolved);
  return eval(resolved, s.witness);
}

uint64_t fresh_id(const ExecContext& ctx) { return ctx.next_id ? (*ctx.next_id)++ : 0; }

void record_tests(SymState& s, const Expr& cond) {
  std::map<std::string, uint32_t> masks;
  collect_mask_tests(cond, masks);
  for (const auto& [name, mask] : masks) {
    s.mask_tests[name] |= mask;
    if (auto reg = mmio_var_addr(name)) s.periph.observe_bit_test(*reg, mask);
  }
}

/// Two-way branch on a boolean-valued condition.
void branch(const ExecContext& ctx, SymState& s, const Expr& cond, uint32_t if_true, uint32_t if_false,
            StepOutcome& out) {
  if (cond.has_vars()) record_tests(s, cond);
  const Expr c = resolve(s, cond);
  if (c.is_const()) {
    s.pc = c.value() ? if_true : if_false;
    return;
  }
  const Expr not_c = logical_not(c);
  const bool witness_true = witness_eval(s, c) != 0;
  const Expr& other = witness_true ? not_c : c;
  std::vector<Expr> query = relevant_constraints(s.path_condition, other);
  query.push_back(other);
  SolveResult r = solve(query, ctx.solver_budget);
  if (!r.sat) {
    s.pc = witness_true ? if_true : if_false;
    return;
  }
  SymState alt = s;
  alt.id = fresh_id(ctx);
  for (const auto& [k, v] : r.model) alt.witness[k] = v;
  alt.path_condition.push_back(other);
  alt.pc = witness_true ? if_false : if_true;
  s.path_condition.push_back(witness_true ? c : not_c);
  s.pc = witness_true ? if_true : if_false;
  if (witness_true) {
    out.forks.push_back(std::move(alt));
  } else {
    // Keep the taken direction in place so children come out (taken, fallthrough).
    std::swap(s, alt);
    std::swap(s.id, alt.id);
    out.forks.push_back(std::move(alt));
  }
}

uint32_t concrete_address(SymState& s, const Expr& e, uint64_t budget) {
  const Expr r = resolve(s, e);
  if (r.is_const()) return r.value();
  s.address_dependent = true;
  return concretize(s, r, budget);
}

void push_frame(const ExecContext& ctx, SymState& s) {
  const uint32_t sp = concrete_address(s, s.regs[kStackReg], ctx.solver_budget) - kFrameBytes;
  const MemPermissions perms{ctx.image->map};
  for (uint32_t off = 0; off < kFrameBytes; off += 4) check_access(sp + off, AccessKind::Write, perms, s.pc, s.id);
  s.mem[sp] = Expr::constant(s.pc);
  s.mem[sp + 4] = s.regs[kLinkReg];
  s.mem[sp + 8] = bor(s.z, shl(s.n, Expr::constant(1)));
  s.regs[kStackReg] = Expr::constant(sp);
  s.in_isr = true;
  s.saved_block_start = s.block_start;
  s.block_start = true;
}

Expr mem_load(const ExecContext& ctx, SymState& s, uint32_t addr) {
  const MemoryMap& map = ctx.image->map;
  check_access(addr, AccessKind::Read, MemPermissions{map}, s.pc, s.id);
  switch (map.region_of(addr)) {
    case MemoryMap::Region::Flash:
      return Expr::constant(ctx.image->flash_word(addr).value_or(0));
    case MemoryMap::Region::Ram: {
      if (ctx.old_region && ctx.old_region->contains(addr) && !s.written_globals.count(addr)) {
        const Expr cur = resolve(s, s.mem_value(addr));
        if (!cur.is_const()) return cur;
        std::string name = "old@" + hex32(addr);
        s.bindings[name] = cur.value();
        return Expr::var(name, Origin::GLOBAL, addr);
      }
      return s.mem_value(addr);
    }
    case MemoryMap::Region::Ctrl:
      return Expr::constant(s.nvic.ctrl_read(addr - map.ctrl_base));
    case MemoryMap::Region::Periph: {
      ++s.mmio_block_hits[map.periph_block(addr)];
      ReadContext rc;
      rc.scope = ctx.scope;
      rc.active = s.nvic.active ? &*s.nvic.active : nullptr;
      rc.dr_counter = &s.dr_counter;
      ReadResult rr = s.periph.read(addr, rc);
      if (rr.binding) s.bindings[rr.binding->first] = rr.binding->second;
      return rr.value;
    }
    case MemoryMap::Region::None: break;
  }
  return Expr::constant(0);
}

void mem_store(const ExecContext& ctx, SymState& s, uint32_t addr, const Expr& value, StepOutcome& out) {
  const MemoryMap& map = ctx.image->map;
  check_access(addr, AccessKind::Write, MemPermissions{map}, s.pc, s.id);
  switch (map.region_of(addr)) {
    case MemoryMap::Region::Ram:
      s.mem[addr] = value;
      if (ctx.old_region && ctx.old_region->contains(addr)) s.written_globals.insert(addr);
      if (value.has_vars()) {
        for (const auto& [name, info] : free_vars(value)) {
          (void)info;
          if (auto reg = mmio_var_addr(name)) s.periph.observe_store(*reg);
        }
      }
      break;
    case MemoryMap::Region::Ctrl:
    case MemoryMap::Region::Periph: {
      const Expr r = resolve(s, value);
      uint32_t v = 0;
      if (r.is_const()) {
        v = r.value();
      } else {
        try {
          v = concretize(s, r, ctx.solver_budget);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Unsatisfiable) throw;
          throw Error(ErrorKind::SymbolicMMIOWrite, "at " + hex32(s.pc));
        }
      }
      if (map.region_of(addr) == MemoryMap::Region::Ctrl) {
        auto lines = s.nvic.ctrl_write(addr - map.ctrl_base, v);
        out.lines.insert(out.lines.end(), lines.begin(), lines.end());
      } else {
        ++s.mmio_block_hits[map.periph_block(addr)];
        auto bits = s.periph.write(addr, v);
        out.cr_bits.insert(out.cr_bits.end(), bits.begin(), bits.end());
      }
      break;
    }
    default: break;
  }
}

void set_flags(SymState& s, const Expr& v) {
  s.z = eq(v, Expr::constant(0));
  s.n = shr(v, Expr::constant(31));
}

}  // namespace

uint32_t SymState::concrete_value(const Expr& e) const {
  const Expr r = resolve(*this, e);
  if (r.is_const()) return r.value();
  Model m = witness;
  for (const auto& [name, info] : free_vars(r)) {
    (void)info;
    m.try_emplace(name, 0);
  }
  return eval(r, m);
}

uint32_t concretize(SymState& s, const Expr& e, uint64_t budget) {
  const Expr r = resolve(s, e);
  if (r.is_const()) return r.value();
  // The cached witness satisfies the path condition, so its value is feasible.
  uint32_t v = witness_eval(s, r);
  std::vector<Expr> query = relevant_constraints(s.path_condition, r);
  query.push_back(eq(r, Expr::constant(v)));
  if (!is_sat(query, budget)) {
    // Stale witness (e.g. a hand-built state): ask the solver instead.
    query.pop_back();
    for (auto& c : query) c = substitute(c, s.bindings);
    SolveResult res = solve(query, budget);
    if (!res.sat) throw Error(ErrorKind::Unsatisfiable, "no value for " + to_prefix(r));
    for (const auto& [name, val] : res.model) s.witness[name] = val;
    v = witness_eval(s, r);
  }
  s.path_condition.push_back(eq(r, Expr::constant(v)));
  return v;
}

std::vector<Expr> relevant_constraints(const std::vector<Expr>& pc, const Expr& seed) {
  std::set<std::string> vars;
  for (const auto& [name, info] : free_vars(seed)) {
    (void)info;
    vars.insert(name);
  }
  std::vector<std::set<std::string>> cvars(pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    for (const auto& [name, info] : free_vars(pc[i])) {
      (void)info;
      cvars[i].insert(name);
    }
  }
  std::vector<bool> taken(pc.size(), false);
  bool grew = true;
  while (grew) {
    grew = false;
    for (size_t i = 0; i < pc.size(); ++i) {
      if (taken[i]) continue;
      bool shares = false;
      for (const auto& v : cvars[i]) {
        if (vars.count(v)) {
          shares = true;
          break;
        }
      }
      if (!shares) continue;
      taken[i] = true;
      grew = true;
      vars.insert(cvars[i].begin(), cvars[i].end());
    }
  }
  std::vector<Expr> out;
  for (size_t i = 0; i < pc.size(); ++i) {
    if (taken[i]) out.push_back(pc[i]);
  }
  return out;
}

StepOutcome step_symbolic(const ExecContext& ctx, SymState& s) {
  StepOutcome out;
  if (s.halted) return out;
  const FirmwareImage& image = *ctx.image;

  if (auto line = s.nvic.next_dispatch(s.in_isr)) {
    push_frame(ctx, s);
    s.pc = image.vector(*line);
    out.dispatched = line;
  }

  const uint32_t pc = s.pc;
  check_access(pc, AccessKind::Execute, MemPermissions{image.map}, pc, s.id);
  auto word = image.flash_word(pc);
  if (!word) throw Error(ErrorKind::UnknownOpcode, "fetch outside image at " + hex32(pc));
  const Instr in = decode(*word, image.flash_word(pc + 4), pc);

  auto& r = s.regs;
  const Expr imm = Expr::constant(static_cast<uint32_t>(in.imm));

  if (in.op == Opcode::LD && ctx.is_site && !s.in_isr && ctx.scope == Scope::GLOBAL_DSE &&
      s.skip_site_pc != pc) {
    const Expr a = resolve(s, add(r[in.rs1], imm));
    if (a.is_const() && ctx.is_site(a.value())) {
      out.site_addr = a.value();
      return out;
    }
  }

  if (s.block_start || (ctx.leaders && ctx.leaders->count(pc))) {
    out.block_entry = pc;
    s.blocks.insert(pc);
    ++s.bb_count;
    s.block_start = false;
  }
  ++s.steps;

  TraceEntry te;
  if (ctx.trace) {
    if (s.trace.empty()) s.trace_entry_regs = r;
    te.pc = pc;
    te.instr = in;
  }

  uint32_t next = pc + in.size_bytes();
  bool transfer = false;
  bool pc_set = false;

  switch (in.op) {
    case Opcode::NOP: break;
    case Opcode::LDI: r[in.rd] = Expr::constant(*in.ext_imm); break;
    case Opcode::LD: {
      const uint32_t addr = concrete_address(s, add(r[in.rs1], imm), ctx.solver_budget);
      Expr v = mem_load(ctx, s, addr);
      r[in.rd] = v;
      if (ctx.trace) {
        te.addr = addr;
        te.loaded = v;
      }
      if (s.skip_site_pc == pc) s.skip_site_pc.reset();
      break;
    }
    case Opcode::ST: {
      const uint32_t addr = concrete_address(s, add(r[in.rs1], imm), ctx.solver_budget);
      mem_store(ctx, s, addr, r[in.rs2], out);
      if (ctx.trace) te.addr = addr;
      break;
    }
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SHL:
    case Opcode::SHR: {
      const Expr& a = r[in.rs1];
      const Expr& b = r[in.rs2];
      Expr v;
      switch (in.op) {
        case Opcode::ADD: v = add(a, b); break;
        case Opcode::SUB: v = sub(a, b); break;
        case Opcode::AND: v = band(a, b); break;
        case Opcode::OR: v = bor(a, b); break;
        case Opcode::XOR: v = bxor(a, b); break;
        case Opcode::SHL: v = shl(a, b); break;
        default: v = shr(a, b); break;
      }
      r[in.rd] = v;
      set_flags(s, v);
      break;
    }
    case Opcode::MOV: {
      Expr v = add(r[in.rs1], imm);
      r[in.rd] = v;
      set_flags(s, v);
      break;
    }
    case Opcode::BEQ:
    case Opcode::BNE:
    case Opcode::BLT:
    case Opcode::BGE: {
      const Expr& a = r[in.rs1];
      const Expr& b = r[in.rs2];
      Expr cond;
      switch (in.op) {
        case Opcode::BEQ: cond = eq(a, b); break;
        case Opcode::BNE: cond = ne(a, b); break;
        case Opcode::BLT: cond = ult(a, b); break;
        default: cond = logical_not(ult(a, b)); break;
      }
      const uint32_t target = pc + 4 + static_cast<uint32_t>(in.imm) * 4;
      if (ctx.trace) s.trace.push_back(te);
      branch(ctx, s, cond, target, pc + 4, out);
      s.block_start = true;
      for (auto& f : out.forks) f.block_start = true;
      return out;
    }
    case Opcode::JAL:
      if (in.rd != 0) r[in.rd] = Expr::constant(pc + 4);
      next = pc + 4 + static_cast<uint32_t>(in.imm) * 4;
      transfer = true;
      break;
    case Opcode::JALR: {
      const Expr target = resolve(s, add(r[in.rs1], imm));
      if (in.rd != 0) r[in.rd] = Expr::constant(pc + 4);
      transfer = true;
      if (target.is_const()) {
        next = target.value();
        break;
      }
      std::vector<Expr> base = relevant_constraints(s.path_condition, target);
      std::vector<uint32_t> values = enumerate_values(base, target, ctx.jalr_fanout, ctx.solver_budget);
      if (values.empty()) throw Error(ErrorKind::SymbolicPC, "no feasible target at " + hex32(pc));
      if (ctx.trace) s.trace.push_back(te);
      s.block_start = true;
      SymState proto = s;
      for (size_t i = 0; i < values.size(); ++i) {
        SymState& dst = i == 0 ? s : out.forks.emplace_back(proto);
        if (i != 0) dst.id = fresh_id(ctx);
        const Expr pin = eq(target, Expr::constant(values[i]));
        std::vector<Expr> q = base;
        q.push_back(pin);
        SolveResult m = solve(q, ctx.solver_budget);
        for (const auto& [k, v] : m.model) dst.witness[k] = v;
        dst.path_condition.push_back(pin);
        dst.pc = values[i];
      }
      return out;
    }
    case Opcode::IRET: {
      if (!s.in_isr) throw Error(ErrorKind::IretOutsideIsr, "at " + hex32(pc));
      const uint32_t sp = concrete_address(s, r[kStackReg], ctx.solver_budget);
      const MemPermissions perms{image.map};
      for (uint32_t off = 0; off < kFrameBytes; off += 4) check_access(sp + off, AccessKind::Read, perms, pc, s.id);
      const uint32_t ret = concrete_address(s, s.mem_value(sp), ctx.solver_budget);
      r[kLinkReg] = s.mem_value(sp + 4);
      const Expr f = s.mem_value(sp + 8);
      s.z = band(f, Expr::constant(1));
      s.n = band(shr(f, Expr::constant(1)), Expr::constant(1));
      r[kStackReg] = Expr::constant(sp + kFrameBytes);
      s.in_isr = false;
      s.nvic.finish_isr();
      s.block_start = s.saved_block_start;
      out.isr_returned = true;
      s.pc = ret;
      pc_set = true;
      break;
    }
    case Opcode::HALT:
      s.halted = true;
      next = pc;
      break;
  }
  if (ctx.trace) s.trace.push_back(te);
  if (!pc_set) s.pc = next;
  if (transfer) s.block_start = true;
  return out;
}

SymState concretized(const SymState& s) {
  SymState c = s;
  Model m = s.witness;
  for (const auto& [k, v] : s.bindings) m[k] = v;
  auto value = [&m](const Expr& e) {
    if (!e.has_vars()) return e;
    Model full = m;
    for (const auto& [name, info] : free_vars(e)) {
      (void)info;
      full.try_emplace(name, 0);
    }
    return Expr::constant(eval(e, full));
  };
  for (auto& reg : c.regs) reg = value(reg);
  for (auto& [addr, v] : c.mem) v = value(v);
  c.z = value(c.z);
  c.n = value(c.n);
  c.path_condition.clear();
  c.bindings.clear();
  c.witness.clear();
  return c;
}

MachineState to_machine(const SymState& s) {
  auto word = [](const Expr& e) {
    if (!e.is_const()) throw Error(ErrorKind::UnboundVariable, "state not concrete: " + to_prefix(e));
    return e.value();
  };
  MachineState m;
  for (int i = 0; i < kNumRegs; ++i) m.regs[i] = word(s.regs[i]);
  m.pc = s.pc;
  m.z = word(s.z) != 0;
  m.n = word(s.n) != 0;
  for (const auto& [addr, v] : s.mem) m.ram[addr] = word(v);
  m.halted = s.halted;
  m.in_isr = s.in_isr;
  m.nvic = s.nvic;
  m.periph = s.periph;
  m.steps = s.steps;
  m.dr_reads = s.dr_counter;
  m.block_start = s.block_start;
  m.saved_block_start = s.saved_block_start;
  return m;
}

PathSet explore(const ExecContext& ctx, SymState entry, const StopWhen& stop, size_t path_cap) {
  PathSet out;
  const uint64_t base_steps = entry.steps;
  const uint64_t base_bb = entry.bb_count;
  std::deque<SymState> queue;
  queue.push_back(std::move(entry));
  while (!queue.empty()) {
    SymState s = std::move(queue.front());
    queue.pop_front();
    for (;;) {
      const uint64_t steps = s.steps - base_steps;
      if (stop.kind == StopWhen::Kind::BbBudget && s.block_start && s.bb_count - base_bb >= stop.limit) {
        out.live.push_back(std::move(s));
        break;
      }
      if (stop.kind == StopWhen::Kind::StepBudget && steps >= stop.limit) {
        out.live.push_back(std::move(s));
        break;
      }
      if (s.halted) {
        out.terminated.push_back({std::move(s), StopReason::Halted, "", std::nullopt});
        break;
      }
      if (steps >= stop.max_steps) {
        out.terminated.push_back({std::move(s), StopReason::StepBudget, "safety step budget", std::nullopt});
        break;
      }
      StepOutcome o;
      try {
        o = step_symbolic(ctx, s);
      } catch (const MemoryFault& f) {
        out.terminated.push_back({std::move(s), StopReason::Fault, f.what(), f.info()});
        break;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::SolverBudgetExhausted) throw;
        out.terminated.push_back({std::move(s), StopReason::Error, e.what(), std::nullopt});
        break;
      }
      for (auto& f : o.forks) queue.push_back(std::move(f));
      if (queue.size() > path_cap) {
        throw Error(ErrorKind::PathBudgetExhausted, std::to_string(path_cap) + " pending paths");
      }
      if (stop.kind == StopWhen::Kind::ReturnedFromFrame && o.isr_returned) {
        out.live.push_back(std::move(s));
        break;
      }
    }
  }
  return out;
}

}  // namespace irqsym
