#include "irqsym/machine.hpp"

#include <algorithm>

#include "irqsym/error.hpp"

namespace irqsym {

MachineState MachineState::boot(const FirmwareImage& image, const PeripheralLayout& layout) {
  MachineState s;
  s.pc = image.entry();
  s.regs[kStackReg] = image.initial_sp();
  s.periph = PeripheralMap(image.map);
  s.periph.apply_layout(layout);
  return s;
}

uint32_t MachineState::ram_word(uint32_t addr) const {
  auto it = ram.find(addr);
  return it == ram.end() ? 0 : it->second;
}

uint32_t MachineState::load_word(const FirmwareImage& image, uint32_t addr) const {
  if (image.map.in_flash(addr)) return image.flash_word(addr).value_or(0);
  return ram_word(addr);
}

namespace {

uint32_t mem_read(const FirmwareImage& image, MachineState& s, uint32_t addr,
                  const std::vector<uint32_t>* dr_inputs) {
  const MemoryMap& map = image.map;
  check_access(addr, AccessKind::Read, MemPermissions{map}, s.pc);
  switch (map.region_of(addr)) {
    case MemoryMap::Region::Flash: return image.flash_word(addr).value_or(0);
    case MemoryMap::Region::Ram: return s.ram_word(addr);
    case MemoryMap::Region::Ctrl: return s.nvic.ctrl_read(addr - map.ctrl_base);
    case MemoryMap::Region::Periph: {
      ReadContext ctx;
      ctx.scope = Scope::GLOBAL_DSE;
      ctx.concrete = true;
      ctx.active = s.nvic.active ? &*s.nvic.active : nullptr;
      ctx.dr_counter = &s.dr_reads;
      ctx.dr_inputs = dr_inputs;
      return s.periph.read(addr, ctx).value.value();
    }
    case MemoryMap::Region::None: break;
  }
  return 0;  // unreachable: check_access faults first
}

void mem_write(const FirmwareImage& image, MachineState& s, uint32_t addr, uint32_t value, StepEvents& ev) {
  const MemoryMap& map = image.map;
  check_access(addr, AccessKind::Write, MemPermissions{map}, s.pc);
  switch (map.region_of(addr)) {
    case MemoryMap::Region::Ram:
      s.ram[addr] = value;
      ev.ram_store = addr;
      break;
    case MemoryMap::Region::Ctrl: {
      auto lines = s.nvic.ctrl_write(addr - map.ctrl_base, value);
      ev.lines.insert(ev.lines.end(), lines.begin(), lines.end());
      break;
    }
    case MemoryMap::Region::Periph: {
      auto bits = s.periph.write(addr, value);
      ev.cr_bits.insert(ev.cr_bits.end(), bits.begin(), bits.end());
      break;
    }
    default: break;
  }
}

void dispatch(const FirmwareImage& image, MachineState& s, int line) {
  uint32_t sp = s.regs[kStackReg] - kFrameBytes;
  const MemPermissions perms{image.map};
  for (uint32_t off = 0; off < kFrameBytes; off += 4) check_access(sp + off, AccessKind::Write, perms, s.pc);
  s.ram[sp] = s.pc;
  s.ram[sp + 4] = s.regs[kLinkReg];
  s.ram[sp + 8] = pack_flags(s.z, s.n);
  s.regs[kStackReg] = sp;
  s.in_isr = true;
  s.saved_block_start = s.block_start;
  s.block_start = true;
  s.pc = image.vector(line);
}

void set_flags(MachineState& s, uint32_t v) {
  s.z = v == 0;
  s.n = (v >> 31) != 0;
}

}  // namespace

StepEvents step_concrete(const FirmwareImage& image, MachineState& s, const std::vector<uint32_t>* dr_inputs) {
  StepEvents ev;
  if (s.halted) return ev;
  if (auto line = s.nvic.next_dispatch(s.in_isr)) {
    dispatch(image, s, *line);
    ev.dispatched = line;
  }

  const uint32_t pc = s.pc;
  check_access(pc, AccessKind::Execute, MemPermissions{image.map}, pc);
  auto word = image.flash_word(pc);
  if (!word) throw Error(ErrorKind::UnknownOpcode, "fetch outside image at " + hex32(pc));
  const Instr in = decode(*word, image.flash_word(pc + 4), pc);

  if (s.block_start) {
    ev.block_entry = true;
    ev.block_addr = pc;
    s.block_start = false;
  }
  ++s.steps;

  auto& r = s.regs;
  const uint32_t a = r[in.rs1];
  const uint32_t b = r[in.rs2];
  const uint32_t imm = static_cast<uint32_t>(in.imm);
  uint32_t next = pc + in.size_bytes();
  bool transfer = false;
  auto write_rd = [&](uint32_t v) { r[in.rd] = v; };

  switch (in.op) {
    case Opcode::NOP: break;
    case Opcode::LDI: write_rd(*in.ext_imm); break;
    case Opcode::LD: write_rd(mem_read(image, s, a + imm, dr_inputs)); break;
    case Opcode::ST: mem_write(image, s, a + imm, b, ev); break;
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SHL:
    case Opcode::SHR: {
      uint32_t v = 0;
      switch (in.op) {
        case Opcode::ADD: v = a + b; break;
        case Opcode::SUB: v = a - b; break;
        case Opcode::AND: v = a & b; break;
        case Opcode::OR: v = a | b; break;
        case Opcode::XOR: v = a ^ b; break;
        case Opcode::SHL: v = a << (b & 31u); break;
        default: v = a >> (b & 31u); break;
      }
      write_rd(v);
      set_flags(s, v);
      break;
    }
    case Opcode::MOV: {
      uint32_t v = a + imm;
      write_rd(v);
      set_flags(s, v);
      break;
    }
    case Opcode::BEQ:
    case Opcode::BNE:
    case Opcode::BLT:
    case Opcode::BGE: {
      bool taken = false;
      switch (in.op) {
        case Opcode::BEQ: taken = a == b; break;
        case Opcode::BNE: taken = a != b; break;
        case Opcode::BLT: taken = a < b; break;
        default: taken = a >= b; break;
      }
      if (taken) next = pc + 4 + imm * 4;
      transfer = true;
      break;
    }
    case Opcode::JAL:
      if (in.rd != 0) r[in.rd] = pc + 4;
      next = pc + 4 + imm * 4;
      transfer = true;
      break;
    case Opcode::JALR:
      next = a + imm;
      if (in.rd != 0) r[in.rd] = pc + 4;
      transfer = true;
      break;
    case Opcode::IRET: {
      if (!s.in_isr) throw Error(ErrorKind::IretOutsideIsr, "at " + hex32(pc));
      const uint32_t sp = r[kStackReg];
      const MemPermissions perms{image.map};
      for (uint32_t off = 0; off < kFrameBytes; off += 4) check_access(sp + off, AccessKind::Read, perms, pc);
      next = s.ram_word(sp);
      r[kLinkReg] = s.ram_word(sp + 4);
      const uint32_t f = s.ram_word(sp + 8);
      s.z = f & 1u;
      s.n = (f >> 1) & 1u;
      r[kStackReg] = sp + kFrameBytes;
      s.in_isr = false;
      s.nvic.finish_isr();
      s.block_start = s.saved_block_start;
      ev.isr_returned = true;
      break;
    }
    case Opcode::HALT:
      s.halted = true;
      next = pc;
      break;
  }
  s.pc = next;
  if (transfer) s.block_start = true;
  return ev;
}

ConcreteRun run_steps(const FirmwareImage& image, MachineState start, const ConcreteInputs& inputs,
                      uint64_t max_steps, const std::function<bool(const MachineState&)>& stop) {
  ConcreteRun out;
  out.final_state = std::move(start);
  MachineState& s = out.final_state;
  size_t next_firing = 0;
  const auto& sched = inputs.schedule;
  // Entries already in the past relative to the start state are skipped.
  while (next_firing < sched.size() && sched[next_firing].at_step < s.steps) ++next_firing;
  const uint64_t limit = s.steps + max_steps;
  while (!s.halted && s.steps < limit) {
    while (next_firing < sched.size() && sched[next_firing].at_step == s.steps) {
      const auto& f = sched[next_firing++];
      s.nvic.fire(f.line, f.sr, f.dr, f.force);
    }
    if (stop && stop(s)) {
      out.stopped = true;
      break;
    }
    StepEvents ev = step_concrete(image, s, &inputs.dr_values);
    if (ev.block_entry) out.blocks.push_back(ev.block_addr);
  }
  out.halted = s.halted;
  return out;
}

ConcreteRun run_concrete(const FirmwareImage& image, const ConcreteInputs& inputs, uint64_t max_steps) {
  ConcreteRun run = run_steps(image, MachineState::boot(image, inputs.layout), inputs, max_steps);
  if (!run.halted) throw Error(ErrorKind::StepBudgetExhausted, std::to_string(max_steps) + " steps");
  return run;
}

void fire_and_run_isr(const FirmwareImage& image, MachineState& s, int line, uint32_t sr,
                      const std::vector<uint32_t>& dr, uint64_t max_steps, bool force) {
  s.nvic.fire(line, sr, dr, force);
  bool entered = false;
  for (uint64_t i = 0; i < max_steps && !s.halted; ++i) {
    StepEvents ev = step_concrete(image, s);
    if (ev.dispatched) entered = true;
    if (entered && ev.isr_returned) return;
  }
  throw Error(ErrorKind::StepBudgetExhausted, "ISR for line " + std::to_string(line) + " did not return");
}

}  // namespace irqsym
