#pragma once

// Concrete MVM-32 interpreter. This is the reference semantics: the
// symbolic engine must agree with it instruction for instruction, and the
// test oracles replay engine findings through it.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "irqsym/isa.hpp"
#include "irqsym/mmio.hpp"
#include "irqsym/nvic.hpp"

namespace irqsym {

inline constexpr uint32_t kFrameBytes = 12;

inline uint32_t pack_flags(bool z, bool n) { return (z ? 1u : 0u) | (n ? 2u : 0u); }

struct MachineState {
  std::array<uint32_t, kNumRegs> regs{};
  uint32_t pc = 0;
  bool z = false;
  bool n = false;
  std::unordered_map<uint32_t, uint32_t> ram;  // word-addressed, absent = 0
  bool halted = false;
  bool in_isr = false;
  NvicState nvic;
  PeripheralMap periph;
  uint64_t steps = 0;
  uint32_t dr_reads = 0;
  // Block bookkeeping: the next instruction starts a dynamic basic block.
  bool block_start = true;
  bool saved_block_start = false;

  static MachineState boot(const FirmwareImage& image, const PeripheralLayout& layout = {});

  uint32_t load_word(const FirmwareImage& image, uint32_t addr) const;  // RAM or flash
  uint32_t ram_word(uint32_t addr) const;
};

struct ScheduledFiring {
  uint64_t at_step = 0;
  int line = 0;
  uint32_t sr = 0;
  std::vector<uint32_t> dr;
  bool force = false;
  friend bool operator==(const ScheduledFiring&, const ScheduledFiring&) = default;
};

struct ConcreteInputs {
  std::vector<uint32_t> dr_values;
  std::vector<ScheduledFiring> schedule;  // sorted by at_step
  PeripheralLayout layout;
};

struct StepEvents {
  bool block_entry = false;
  uint32_t block_addr = 0;
  std::optional<int> dispatched;
  bool isr_returned = false;
  std::vector<LineEnabled> lines;
  std::vector<CrBitEnabled> cr_bits;
  std::optional<uint32_t> ram_store;  // address written by ST
};

/// Executes one instruction (after dispatching a ready interrupt, if any).
/// Throws MemoryFault, UnknownOpcode, IretOutsideIsr.
StepEvents step_concrete(const FirmwareImage& image, MachineState& s,
                         const std::vector<uint32_t>* dr_inputs = nullptr);

struct ConcreteRun {
  std::vector<uint32_t> blocks;  // dynamic basic-block entries in order
  MachineState final_state;
  bool halted = false;
  bool stopped = false;  // `stop` returned true
};

/// Runs from `start`, firing `schedule` entries when the step counter reaches
/// their at_step. Stops on HALT, when `stop` returns true before a step, or
/// after `max_steps`; never throws for budget reasons.
ConcreteRun run_steps(const FirmwareImage& image, MachineState start, const ConcreteInputs& inputs,
                      uint64_t max_steps,
                      const std::function<bool(const MachineState&)>& stop = nullptr);

/// Boots the image and runs to HALT. Throws StepBudgetExhausted otherwise.
ConcreteRun run_concrete(const FirmwareImage& image, const ConcreteInputs& inputs, uint64_t max_steps);

/// Pends `line` (forcing past a disabled line when asked) and runs until the
/// ISR returns. Throws StepBudgetExhausted if it does not within max_steps.
void fire_and_run_isr(const FirmwareImage& image, MachineState& s, int line, uint32_t sr,
                      const std::vector<uint32_t>& dr, uint64_t max_steps = 100000, bool force = false);

}  // namespace irqsym
