#include "irqsym/nvic.hpp"

#include <bit>
#include <string>

#include "irqsym/error.hpp"

namespace irqsym {

std::vector<LineEnabled> NvicState::ctrl_write(uint32_t offset, uint32_t value) {
  std::vector<LineEnabled> events;
  switch (offset) {
    case kIserOffset: {
      uint32_t rising = value & ~enabled;
      enabled |= value;
      for (int line = 0; line < 32; ++line) {
        if ((rising >> line) & 1u) events.push_back({line});
      }
      break;
    }
    case kIcerOffset:
      enabled &= ~value;
      break;
    case kIsprOffset:
      pending |= value;
      break;
    default:
      throw Error(ErrorKind::UnmappedControllerOffset, hex32(offset));
  }
  return events;
}

uint32_t NvicState::ctrl_read(uint32_t offset) const {
  switch (offset) {
    case kIserOffset:
    case kIcerOffset:
      return enabled;
    case kIsprOffset:
      return pending;
    default:
      throw Error(ErrorKind::UnmappedControllerOffset, hex32(offset));
  }
}

void NvicState::fire(int line, uint32_t sr_value, std::vector<uint32_t> dr_payloads, bool force) {
  if (line < 0 || line >= 32) throw Error(ErrorKind::LineNotEnabled, "line " + std::to_string(line));
  if (!force && !line_enabled(line)) {
    throw Error(ErrorKind::LineNotEnabled, "line " + std::to_string(line));
  }
  pending |= 1u << line;
  if (!line_enabled(line)) forced |= 1u << line;
  staged_sr[line] = sr_value;
  staged_dr[line] = std::move(dr_payloads);
}

std::optional<int> NvicState::next_dispatch(bool in_isr) {
  if (in_isr) return std::nullopt;
  const uint32_t ready = pending & (enabled | forced);
  if (ready == 0) return std::nullopt;
  int line = std::countr_zero(ready);
  pending &= ~(1u << line);
  forced &= ~(1u << line);
  ActiveIsr a;
  a.line = line;
  if (auto it = staged_sr.find(line); it != staged_sr.end()) {
    a.sr = it->second;
    staged_sr.erase(it);
  }
  if (auto it = staged_dr.find(line); it != staged_dr.end()) {
    a.dr.assign(it->second.begin(), it->second.end());
    staged_dr.erase(it);
  }
  active = std::move(a);
  return line;
}

}  // namespace irqsym
