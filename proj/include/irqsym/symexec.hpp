#pragma once

// Symbolic MVM-32 interpreter. Registers and memory hold expressions; the
// pc stays concrete. Variables bound in `bindings` (probes, old global
// values) are concrete for every decision but stay symbolic in the values
// they flow into, so effect formulas can be read off the final state.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqsym/expr.hpp"
#include "irqsym/isa.hpp"
#include "irqsym/machine.hpp"
#include "irqsym/mmio.hpp"
#include "irqsym/nvic.hpp"
#include "irqsym/solver.hpp"

namespace irqsym {

/// Half-open RAM address ranges.
struct GlobalRegion {
  std::vector<std::pair<uint32_t, uint32_t>> ranges;

  bool contains(uint32_t addr) const;
  bool empty() const { return ranges.empty(); }
  friend bool operator==(const GlobalRegion&, const GlobalRegion&) = default;
};

struct TraceEntry {
  uint32_t pc = 0;
  Instr instr;
  uint32_t addr = 0;  // LD/ST effective address
  Expr loaded;        // LD result
};

struct SymState {
  uint64_t id = 0;
  std::array<Expr, kNumRegs> regs;
  uint32_t pc = 0;
  Expr z;
  Expr n;
  std::map<uint32_t, Expr> mem;  // RAM, absent = 0
  std::vector<Expr> path_condition;
  Model bindings;  // concrete values of PROBE and old@ variables
  Model witness;   // satisfies path_condition; cached to skip solver calls
  bool halted = false;
  bool in_isr = false;
  NvicState nvic;
  PeripheralMap periph;
  uint64_t steps = 0;
  uint64_t bb_count = 0;
  uint32_t dr_counter = 0;
  bool block_start = true;
  bool saved_block_start = false;
  std::set<uint32_t> blocks;  // dynamic block entries on this path

  // Replay record: firings applied to this path.
  std::vector<ScheduledFiring> schedule;

  // ISR analysis bookkeeping.
  std::set<uint32_t> written_globals;
  std::map<std::string, uint32_t> mask_tests;     // var name -> tested bits
  std::map<uint32_t, uint32_t> mmio_block_hits;   // peripheral block -> accesses
  bool address_dependent = false;
  std::vector<TraceEntry> trace;
  std::array<Expr, kNumRegs> trace_entry_regs;

  // Driver bookkeeping.
  std::optional<uint32_t> skip_site_pc;
  uint64_t blocks_since_fire = 0;
  int fixed_rr = 0;

  static SymState boot(const FirmwareImage& image, const PeripheralLayout& layout = {});

  Expr mem_value(uint32_t addr) const;
  /// Value of `e` under bindings and the cached witness (unassigned vars = 0).
  uint32_t concrete_value(const Expr& e) const;
};

struct ExecContext {
  const FirmwareImage* image = nullptr;
  Scope scope = Scope::GLOBAL_DSE;
  /// ISR analysis: unwritten reads in this region yield old@ variables.
  const GlobalRegion* old_region = nullptr;
  bool trace = false;
  /// Site detection for LD addresses; null disables it.
  std::function<bool(uint32_t)> is_site;
  uint64_t solver_budget = kDefaultSolverBudget;
  size_t jalr_fanout = 8;
  uint64_t* next_id = nullptr;
  /// Static block starts; reaching one begins a block even without a
  /// control transfer (fall-through into a branch target).
  const std::set<uint32_t>* leaders = nullptr;
};

struct StepOutcome {
  std::vector<SymState> forks;  // extra successors; the first stays in place
  std::optional<uint32_t> block_entry;
  std::optional<int> dispatched;
  bool isr_returned = false;
  std::vector<LineEnabled> lines;
  std::vector<CrBitEnabled> cr_bits;
  /// Set when a firing site was detected; the LD was not executed.
  std::optional<uint32_t> site_addr;
};

/// One instruction on `s` (after a ready dispatch). Throws MemoryFault,
/// UnknownOpcode, SymbolicPC, SymbolicMMIOWrite, IretOutsideIsr,
/// SolverBudgetExhausted.
StepOutcome step_symbolic(const ExecContext& ctx, SymState& s);

/// Pins `e` to one feasible value and records the choice.
uint32_t concretize(SymState& s, const Expr& e, uint64_t budget = kDefaultSolverBudget);

/// Constraints that share variables, transitively, with `seed`.
std::vector<Expr> relevant_constraints(const std::vector<Expr>& pc, const Expr& seed);

/// Fully concrete copy: every register, flag and memory cell evaluated under
/// bindings and a model of the path condition.
SymState concretized(const SymState& s);

/// Conversion for concrete replay; `s` must already be concrete.
MachineState to_machine(const SymState& s);

enum class StopReason { Returned, BbBudget, StepBudget, Halted, Fault, Error };

const char* to_string(StopReason r);

struct StopWhen {
  enum class Kind { ReturnedFromFrame, BbBudget, StepBudget } kind = Kind::ReturnedFromFrame;
  uint64_t limit = 0;
  /// Safety net for every kind.
  uint64_t max_steps = 20000;
};

struct TerminatedPath {
  SymState state;
  StopReason reason;
  std::string detail;
  std::optional<MemoryFaultInfo> fault;
};

struct PathSet {
  std::vector<SymState> live;  // paths that reached the stop condition
  std::vector<TerminatedPath> terminated;
};

inline constexpr size_t kDefaultPathCap = 4096;

/// Breadth-first expansion from `entry`. Throws PathBudgetExhausted when
/// more than `path_cap` paths are pending.
PathSet explore(const ExecContext& ctx, SymState entry, const StopWhen& stop, size_t path_cap = kDefaultPathCap);

}  // namespace irqsym
