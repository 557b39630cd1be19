#pragma once

// Top-level analysis loop: global symbolic execution from reset with
// coverage-guided path selection, switching into interrupt identification
// on controller/CR events and into just-in-time firing at read sites. The
// NO_INT and FIXED modes are the comparison baselines.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "irqsym/cfg.hpp"
#include "irqsym/ident.hpp"
#include "irqsym/jit.hpp"
#include "irqsym/machine.hpp"
#include "irqsym/symexec.hpp"

namespace irqsym {

enum class Mode : uint8_t { AIM, NO_INT, FIXED };

struct AnalysisConfig {
  Mode mode = Mode::AIM;
  uint64_t fixed_period = 1000;  // basic blocks between FIXED firings
  /// FIXED only: round-robin over every vectored line, enabled or not,
  /// staging every event flag its ISR tests.
  bool force_fixed = false;
  uint64_t max_steps = 2'000'000;  // shared by all paths and fired ISRs
  double time_budget_s = 0;        // 0 = none; ignored when deterministic
  bool deterministic = false;
  uint64_t isr_window = 30;
  size_t max_seq_len = 64;
  uint64_t solver_budget = kDefaultSolverBudget;
  size_t path_cap = kDefaultPathCap;
  uint64_t quantum = 256;  // steps per scheduling decision
};

/// "aim", "no_int", "fixed" or "fixed:N". Throws InvalidConfig.
void parse_mode(const std::string& text, AnalysisConfig& config);
std::string mode_name(const AnalysisConfig& config);

struct Coverage {
  std::set<uint32_t> covered_blocks;
  std::map<uint32_t, double> first_hit_time;  // seconds since start
  std::map<uint32_t, uint64_t> first_hit_step;
  std::map<uint64_t, std::set<uint32_t>> per_path;  // path 0 = ISR analysis

  /// True when `block` was not covered before.
  bool add(uint64_t path, uint32_t block, uint64_t step, double seconds);
};

struct Candidate {
  std::optional<uint32_t> distance;  // to the nearest uncovered block
  uint64_t steps = 0;
  uint64_t order = 0;  // insertion order
};

/// Index of the preferred candidate: minimal distance, then fewer steps,
/// then earlier insertion. `candidates` must not be empty.
size_t prioritize(const std::vector<Candidate>& candidates);

/// Fires the next round-robin line when `period` blocks have passed since
/// the last firing. `known_sr` holds the staged SR per line (0 if absent).
std::optional<ScheduledFiring> baseline_tick(SymState& state, const FirmwareImage& image, const AnalysisConfig& config,
                                             const std::map<int, uint32_t>& known_sr);

struct FaultRecord {
  MemoryFaultInfo info;
  std::vector<uint32_t> dr_inputs;
  std::vector<ScheduledFiring> schedule;
  uint64_t steps = 0;
  bool replayed = false;
};

/// Boots concretely with the record's inputs and firings; true when the
/// same fault recurs.
bool replay_fault(const FirmwareImage& image, const PeripheralLayout& layout, const FaultRecord& fault);

struct PathError {
  uint64_t path = 0;
  uint32_t pc = 0;
  ErrorKind kind = ErrorKind::InvalidConfig;
  std::string detail;
};

struct SequenceRecord {
  uint32_t site_pc = 0;
  uint32_t var_addr = 0;
  std::vector<Firing> firings;
  std::optional<Pattern> pattern;
  uint64_t step = 0;
};

struct AnalysisStats {
  uint64_t steps = 0;
  uint64_t paths = 0;  // roots plus forks plus fired children
  uint64_t terminated = 0;
  uint64_t halted = 0;
  uint64_t evicted = 0;
  uint64_t site_visits = 0;
  uint64_t site_analyses = 0;
  uint64_t local_paths = 0;
  uint64_t pruned_paths = 0;
  uint64_t already_satisfied = 0;
  uint64_t inference_failures = 0;
  uint64_t post_fire_mismatches = 0;
  uint64_t baseline_firings = 0;
  uint64_t forced_disabled_firings = 0;
  uint64_t isr_analyses = 0;
};

struct AnalysisReport {
  std::string name;
  AnalysisConfig config;
  uint64_t total_blocks = 0;
  Coverage coverage;
  std::vector<std::pair<uint64_t, uint64_t>> trend;  // (step, covered)
  std::set<uint32_t> sites;
  std::vector<SequenceRecord> sequences;
  nlohmann::json imt = nlohmann::json::array();
  size_t imt_records = 0;
  InterruptModelTable table;  // final model table, for replay checks
  GlobalRegion region;
  std::vector<FaultRecord> faults;
  std::vector<PathError> errors;
  AnalysisStats stats;
  std::map<std::string, double> phase_times;  // seconds
  std::map<std::string, uint64_t> phase_counts;
  std::vector<std::string> log;

  size_t covered() const { return coverage.covered_blocks.size(); }
  double percent() const;
  /// Sequences fired at `site_pc`.
  std::vector<const SequenceRecord*> sequences_at(uint32_t site_pc) const;

  /// Versioned report document. The timestamp is the only field that
  /// differs between deterministic runs.
  nlohmann::json to_json(bool with_timestamp = true) const;
  /// `step,covered` rows with a header.
  std::string trend_csv() const;
};

inline constexpr const char* kReportSchema = "irqsym.analysis/1";

AnalysisReport run_analysis(const FirmwareImage& image, const PeripheralLayout& layout, const AnalysisConfig& config,
                            const std::string& name = "");

struct ModeResult {
  std::string mode;
  size_t covered = 0;
  double percent = 0;
  long delta_vs_no_int = 0;
};

/// Runs each mode with the same budgets; deltas are against NO_INT when it
/// is among the modes, else against the first.
std::vector<ModeResult> compare_modes(const FirmwareImage& image, const PeripheralLayout& layout,
                                      const std::vector<AnalysisConfig>& modes);

}  // namespace irqsym
