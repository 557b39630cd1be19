#pragma once

// Interrupt controller: enable / clear-enable / set-pending registers, a
// fixed lowest-line-first arbitration, and staging of the SR value and DR
// payload that the next dispatched ISR will observe.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace irqsym {

inline constexpr uint32_t kIserOffset = 0x100;
inline constexpr uint32_t kIcerOffset = 0x180;
inline constexpr uint32_t kIsprOffset = 0x200;

struct LineEnabled {
  int line;
  friend bool operator==(const LineEnabled&, const LineEnabled&) = default;
};

/// What the running ISR sees: the SR value and DR payload staged by fire().
struct ActiveIsr {
  int line = -1;
  std::optional<uint32_t> sr;
  std::deque<uint32_t> dr;
  friend bool operator==(const ActiveIsr&, const ActiveIsr&) = default;
};

struct NvicState {
  uint32_t enabled = 0;
  uint32_t pending = 0;
  uint32_t forced = 0;  // pended through fire(..., force = true) while disabled
  std::map<int, uint32_t> staged_sr;
  std::map<int, std::vector<uint32_t>> staged_dr;
  std::optional<ActiveIsr> active;

  /// Returns the lines that went from disabled to enabled.
  std::vector<LineEnabled> ctrl_write(uint32_t offset, uint32_t value);
  uint32_t ctrl_read(uint32_t offset) const;

  /// Pends `line` with staged SR/DR values. Throws LineNotEnabled unless
  /// `force` is set.
  void fire(int line, uint32_t sr_value, std::vector<uint32_t> dr_payloads, bool force = false);

  /// Lowest enabled+pending line when not already inside an ISR; clears its
  /// pending bit and moves its staged values into `active`.
  std::optional<int> next_dispatch(bool in_isr);

  /// Called on ISR exit.
  void finish_isr() { active.reset(); }

  bool line_enabled(int line) const { return (enabled >> line) & 1u; }

  friend bool operator==(const NvicState&, const NvicState&) = default;
};

}  // namespace irqsym
