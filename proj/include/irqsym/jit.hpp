#pragma once

// Just-in-time interrupt firing: when the firmware is about to read a
// global the model table knows about, explore a short window past the read
// with the global symbolic, keep the paths that reach new code, and infer
// the interrupts that would steer the value onto each of them.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqsym/ident.hpp"
#include "irqsym/symexec.hpp"

namespace irqsym {

struct JitConfig {
  uint64_t isr_window = 30;  // basic blocks explored past the site
  size_t max_seq_len = 64;
  size_t path_cap = 256;  // pending paths per local exploration
  uint64_t max_local_steps = 5000;
  uint64_t max_isr_steps = 20000;
  uint64_t solver_budget = kDefaultSolverBudget;
  const std::set<uint32_t>* leaders = nullptr;
};

struct FiringSite {
  uint32_t pc = 0;
  uint32_t var_addr = 0;
  uint64_t occurrence = 0;
  friend bool operator==(const FiringSite&, const FiringSite&) = default;
};

/// Sites seen so far, keyed by pc.
class SiteRegistry {
 public:
  FiringSite& visit(uint32_t pc, uint32_t var_addr);
  const std::map<uint32_t, FiringSite>& sites() const { return sites_; }

 private:
  std::map<uint32_t, FiringSite> sites_;
};

/// A site when `state` is about to load a table key outside an ISR.
std::optional<FiringSite> detect_site(const SymState& state, const FirmwareImage& image,
                                      const InterruptModelTable& table, SiteRegistry& registry);

std::string global_var_name(uint32_t addr);

struct LocalPath {
  std::vector<Expr> constraints;  // new path-condition entries over the global
  std::set<uint32_t> new_blocks;
  StopReason end = StopReason::BbBudget;
  friend bool operator==(const LocalPath&, const LocalPath&) = default;
};

/// Explores `isr_window` blocks from the site with the global symbolic.
std::vector<LocalPath> local_explore(const FirmwareImage& image, const FiringSite& site, const SymState& state,
                                     const std::set<uint32_t>& coverage, const JitConfig& config = {});

/// Largest-first; drops paths whose new blocks another retained path covers.
std::vector<LocalPath> prune(std::vector<LocalPath> paths);

struct Firing {
  int line = 0;
  uint32_t sr = 0;
  std::vector<uint32_t> dr;
  friend bool operator==(const Firing&, const Firing&) = default;
};

struct InterruptSequence {
  std::vector<Firing> firings;
  std::optional<Pattern> pattern;  // of the record used; none when empty
  friend bool operator==(const InterruptSequence&, const InterruptSequence&) = default;
};

/// Interrupts that make the global satisfy `path`. Throws InferenceFailed.
InterruptSequence infer_sequence(const LocalPath& path, const FiringSite& site, const InterruptModelTable& table,
                                 const SymState& state, const JitConfig& config = {});

struct FireResult {
  SymState state;
  std::vector<LineEnabled> lines;
  std::vector<CrBitEnabled> cr_bits;
  std::set<uint32_t> blocks;  // entered while the fired ISRs ran
  uint64_t steps = 0;
};

/// Fires `seq` on a copy of the pre-read `state`, running each ISR to its
/// return, and checks the global against `path`. The copy resumes at the
/// read with site detection suppressed for it. Throws LineNotEnabled and
/// PostFireMismatch.
FireResult fire_sequence(const FirmwareImage& image, const InterruptSequence& seq, const FiringSite& site,
                         const LocalPath& path, const SymState& state, const JitConfig& config = {});

}  // namespace irqsym
