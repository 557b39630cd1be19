#pragma once

// Built-in firmware corpus. Each fixture is assembly source whose `;!`
// comment lines state its ground truth; labels in those lines resolve
// against the assembled symbol table.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqsym/assembler.hpp"

namespace irqsym {

struct GroundTruth {
  std::optional<int> line;
  std::map<int, std::set<int>> sr_bits;
  std::vector<std::string> switches;  // "REG:bit", REG an .equ offset name
  std::map<std::string, std::string> patterns;
  std::map<std::string, int> sequences;    // site label -> firings
  std::map<std::string, int> local_paths;  // site label -> local paths
  std::vector<std::string> dependent;      // interrupt-dependent block labels
  std::vector<std::pair<uint32_t, uint32_t>> regions;
  bool no_region = false;
  bool strict = false;  // AIM must beat FIXED here
  std::optional<std::pair<std::string, std::string>> fault;  // label, access kind
  std::optional<int> crash_line;
  std::vector<std::string> stale;
  std::optional<std::pair<std::string, std::string>> jalr_target;  // site, target
};

struct Fixture {
  std::string name;
  std::string source;
  AsmUnit unit;
  GroundTruth truth;

  uint32_t addr(const std::string& label) const { return unit.symbol(label); }
};

/// Names of every built-in fixture, sorted.
std::vector<std::string> fixture_names();

/// The eight-fixture core corpus used for cross-mode comparisons.
std::vector<std::string> core_corpus();

/// Throws UnknownFixture.
Fixture fixture(const std::string& name);

GroundTruth parse_ground_truth(const std::string& source);

}  // namespace irqsym
