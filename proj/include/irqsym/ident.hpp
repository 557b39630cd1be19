#pragma once

// Interrupt identification: locate the firmware's global variables, explore
// each ISR symbolically with preserved CR values and symbolic SR/DR, slice
// out how every path changes the globals, and index the surviving paths by
// the variables they modify.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "irqsym/expr.hpp"
#include "irqsym/isa.hpp"
#include "irqsym/mmio.hpp"
#include "irqsym/nvic.hpp"
#include "irqsym/symexec.hpp"

namespace irqsym {

inline constexpr uint32_t kStackReserve = 1024;

/// Concretely runs the reset handler up to its first call and returns the
/// RAM ranges it initialized. Throws RegionNotFound if it wrote no RAM.
GlobalRegion locate_global_region(const FirmwareImage& image, const PeripheralLayout& layout = {},
                                  uint64_t max_steps = 200000);

/// All RAM below the stack reserve.
GlobalRegion fallback_region(const FirmwareImage& image);

enum class Pattern : uint8_t { CONST_ASSIGN, SELF_REFERRAL, DATA_RECEPTION, OTHER };
const char* to_string(Pattern p);

/// Pure function of the formula.
Pattern classify_pattern(uint32_t var_addr, const Expr& formula);

std::string old_var_name(uint32_t addr);

struct Effect {
  uint32_t var_addr = 0;
  Expr formula;  // over old@ globals, SR and DR variables, constants
  Pattern pattern = Pattern::OTHER;
  friend bool operator==(const Effect&, const Effect&) = default;
};

/// Dynamic backward slice of the value stored by trace entry `index`: the
/// trace indices it depends on, and the formula rebuilt from them alone.
struct Slice {
  std::vector<size_t> instrs;  // ascending
  Expr formula;
};
Slice backward_slice(const SymState& path, size_t index);

/// Last write to each global written on `path`, as sliced formulas with
/// probe values substituted. Writes that store the old value back are not
/// effects.
std::vector<Effect> extract_effects(const SymState& path, const GlobalRegion& region);

struct ISRPathRecord {
  int line = 0;
  uint32_t sr_value = 0;
  std::vector<Effect> effects;  // ascending var_addr
  size_t side_effect_count = 0;
  std::vector<uint32_t> dr_witness;  // DR payloads in read order
  std::vector<Expr> path_condition;
  bool address_dependent = false;

  const Effect* effect_on(uint32_t addr) const;
  friend bool operator==(const ISRPathRecord&, const ISRPathRecord&) = default;
};

/// Drops records whose effects duplicate a retained record, then records
/// whose effects are exactly the union of strictly smaller retained ones.
std::vector<ISRPathRecord> filter_paths(std::vector<ISRPathRecord> records);

struct IdentConfig {
  uint64_t solver_budget = kDefaultSolverBudget;
  size_t path_cap = kDefaultPathCap;
  uint64_t max_isr_steps = 20000;
  const std::set<uint32_t>* leaders = nullptr;
};

struct IsrAnalysis {
  int line = 0;
  uint32_t entry = 0;
  std::vector<ISRPathRecord> records;     // filtered
  std::vector<ISRPathRecord> unfiltered;  // effectful, before filtering
  std::optional<ISRPathRecord> null_record;
  uint32_t sr_bits = 0;                   // event flags tested on SR
  std::map<uint32_t, uint32_t> switches;  // CR register -> tested bits
  std::optional<uint32_t> block;          // most accessed peripheral block
  std::set<uint32_t> blocks;              // executed dynamic blocks
  size_t paths = 0;
  std::vector<std::string> log;
};

/// Concrete copy of `base` with an exception frame pushed and the pc at the
/// vector of `line`, ready for ISR analysis.
SymState isr_entry_state(const FirmwareImage& image, const SymState& base, int line);

/// Explores the ISR of `line` as if it fired in `base`.
IsrAnalysis analyze_isr(const FirmwareImage& image, const SymState& base, int line, const GlobalRegion& region,
                        const IdentConfig& config = {});

/// Fires `rec` concretely on `base` and checks every global against the
/// recorded effects. Returns a description of the first mismatch.
std::optional<std::string> replay_record(const FirmwareImage& image, const SymState& base, const ISRPathRecord& rec,
                                         const GlobalRegion& region);

struct LineModel {
  IsrAnalysis analysis;
  SymState base;  // concrete state the line was analyzed in
  std::map<uint32_t, uint32_t> config;  // associated block's CR values at analysis
  uint64_t epoch = 0;
};

class InterruptModelTable {
 public:
  /// Replaces every record of the analyzed line.
  void replace_line(LineModel model);
  /// Records modifying `var_addr`, ordered by side effects, then line, then
  /// SR value. Throws NoModelForVariable.
  std::vector<const ISRPathRecord*> lookup(uint32_t var_addr) const;
  bool has(uint32_t var_addr) const { return index_.count(var_addr) != 0; }
  std::vector<uint32_t> variables() const;
  const std::map<int, LineModel>& lines() const { return lines_; }
  const LineModel* line(int l) const;
  size_t record_count() const;
  uint64_t epoch() const { return epoch_; }

  /// `imt dump` document.
  nlohmann::json to_json() const;

 private:
  void reindex();
  std::map<int, LineModel> lines_;
  std::map<uint32_t, std::vector<std::pair<int, size_t>>> index_;
  uint64_t epoch_ = 0;
};

using TriggerEvent = std::variant<LineEnabled, CrBitEnabled>;

/// Maps trigger events to ISR (re-)analyses and keeps the table.
class InterruptIdentifier {
 public:
  InterruptIdentifier(const FirmwareImage& image, GlobalRegion region, IdentConfig config = {});

  /// Handles one event against `state`; returns the lines analyzed.
  std::vector<int> on_trigger(const TriggerEvent& ev, const SymState& state);
  /// Unconditional re-analysis, e.g. after a post-fire mismatch.
  void reanalyze(int line, const SymState& state);

  const InterruptModelTable& table() const { return table_; }
  const GlobalRegion& region() const { return region_; }
  const std::vector<CrBitEnabled>& deferred() const { return deferred_; }
  const std::vector<std::string>& log() const { return log_; }
  /// Dynamic blocks executed by all analyses so far.
  const std::set<uint32_t>& analyzed_blocks() const { return blocks_; }
  size_t analyses() const { return analyses_; }

 private:
  void analyze(int line, const SymState& state);

  const FirmwareImage* image_;
  GlobalRegion region_;
  IdentConfig config_;
  InterruptModelTable table_;
  std::vector<CrBitEnabled> deferred_;
  std::vector<std::string> log_;
  std::set<uint32_t> blocks_;
  size_t analyses_ = 0;
};

}  // namespace irqsym
