#pragma once

// Static control-flow graph by recursive descent from the reset handler,
// every interrupt vector, and LDI constants that point at decodable code
// (function pointers).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqsym/isa.hpp"

namespace irqsym {

struct CfgBlock {
  uint32_t start = 0;
  uint32_t end = 0;  // exclusive
  std::vector<uint32_t> succs;
  bool unknown_succs = false;  // unresolved JALR
};

struct Cfg {
  std::map<uint32_t, CfgBlock> blocks;
  std::set<uint32_t> entries;

  /// Start of the block whose span contains `addr`.
  std::optional<uint32_t> block_of(uint32_t addr) const;
  std::set<uint32_t> block_starts() const;
  std::string to_dot() const;
};

Cfg build_cfg(const FirmwareImage& image);

struct DistanceOptions {
  /// Treat unresolved indirect jumps as reaching every uncovered block at
  /// this cost. Disabled (dead end) when nullopt.
  std::optional<uint32_t> unknown_edge_cost;
};

/// BFS edge count from `from_block` to the nearest block not in `covered`.
std::optional<uint32_t> distance_to_uncovered(const Cfg& cfg, uint32_t from_block, const std::set<uint32_t>& covered,
                                              const DistanceOptions& opt = {});

/// All-blocks distances from one reverse BFS seeded at the uncovered blocks;
/// agrees with distance_to_uncovered for every block.
std::map<uint32_t, uint32_t> distances_to_uncovered(const Cfg& cfg, const std::set<uint32_t>& covered,
                                                    const DistanceOptions& opt = {});

}  // namespace irqsym
