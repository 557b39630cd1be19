#include "irqsym/cfg.hpp"

#include <deque>
#include <sstream>

#include "irqsym/error.hpp"

namespace irqsym {

namespace {

std::optional<Instr> try_decode(const FirmwareImage& image, uint32_t addr) {
  auto w = image.flash_word(addr);
  if (!w || addr < kVectorSlots * 4) return std::nullopt;
  try {
    return decode(*w, image.flash_word(addr + 4), addr);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Unused fields zero. Used to tell code pointers from data in LDI constants.
bool canonical(const Instr& in) {
  switch (in.op) {
    case Opcode::NOP: return false;
    case Opcode::IRET:
    case Opcode::HALT: return in.rd == 0 && in.rs1 == 0 && in.rs2 == 0 && in.imm == 0;
    case Opcode::LDI: return in.rs1 == 0 && in.rs2 == 0 && in.imm == 0;
    case Opcode::LD:
    case Opcode::MOV:
    case Opcode::JALR: return in.rs2 == 0;
    case Opcode::ST: return in.rd == 0;
    case Opcode::JAL: return in.rs1 == 0 && in.rs2 == 0;
    case Opcode::BEQ:
    case Opcode::BNE:
    case Opcode::BLT:
    case Opcode::BGE: return in.rd == 0;
    default: return in.imm == 0;
  }
}

bool looks_like_code(const FirmwareImage& image, uint32_t addr) {
  auto in = try_decode(image, addr);
  return in && canonical(*in);
}

uint32_t branch_target(const Instr& in, uint32_t pc) { return pc + 4 + static_cast<uint32_t>(in.imm) * 4; }

}  // namespace

std::set<uint32_t> Cfg::block_starts() const {
  std::set<uint32_t> out;
  for (const auto& [a, b] : blocks) out.insert(a);
  return out;
}

std::optional<uint32_t> Cfg::block_of(uint32_t addr) const {
  auto it = blocks.upper_bound(addr);
  if (it == blocks.begin()) return std::nullopt;
  --it;
  if (addr >= it->second.start && addr < it->second.end) return it->first;
  return std::nullopt;
}

std::string Cfg::to_dot() const {
  std::ostringstream out;
  out << "digraph cfg {\n  node [shape=box, fontname=monospace];\n";
  for (const auto& [start, b] : blocks) {
    out << "  \"" << hex32(start) << "\" [label=\"" << hex32(start) << "-" << hex32(b.end) << "\"";
    if (entries.count(start)) out << ", peripheries=2";
    out << "];\n";
  }
  for (const auto& [start, b] : blocks) {
    for (uint32_t s : b.succs) out << "  \"" << hex32(start) << "\" -> \"" << hex32(s) << "\";\n";
    if (b.unknown_succs) out << "  \"" << hex32(start) << "\" -> \"?\" [style=dashed];\n";
  }
  out << "}\n";
  return out.str();
}

Cfg build_cfg(const FirmwareImage& image) {
  Cfg cfg;
  std::set<uint32_t> roots;
  if (try_decode(image, image.entry())) roots.insert(image.entry());
  for (int line = 0; line < kNumLines; ++line) {
    const uint32_t v = image.vector(line);
    if (v != 0 && try_decode(image, v)) roots.insert(v);
  }

  std::map<uint32_t, Instr> code;
  std::set<uint32_t> leaders;
  std::set<uint32_t> resolved_jalr;  // targets found so far

  for (;;) {
    // Discover every instruction reachable from the roots.
    std::deque<uint32_t> work(roots.begin(), roots.end());
    for (uint32_t r : roots) leaders.insert(r);
    while (!work.empty()) {
      uint32_t pc = work.front();
      work.pop_front();
      while (!code.count(pc)) {
        auto in = try_decode(image, pc);
        if (!in) break;
        code[pc] = *in;
        const uint32_t next = pc + in->size_bytes();
        if (in->op == Opcode::LDI && image.map.in_flash(*in->ext_imm) && (*in->ext_imm & 3u) == 0 &&
            looks_like_code(image, *in->ext_imm) && !roots.count(*in->ext_imm)) {
          roots.insert(*in->ext_imm);
          leaders.insert(*in->ext_imm);
          work.push_back(*in->ext_imm);
        }
        if (is_branch(in->op) || in->op == Opcode::JAL) {
          const uint32_t t = branch_target(*in, pc);
          leaders.insert(t);
          leaders.insert(next);
          work.push_back(t);
          work.push_back(next);
          break;
        }
        if (in->op == Opcode::JALR) {
          leaders.insert(next);
          work.push_back(next);
          break;
        }
        if (in->op == Opcode::IRET || in->op == Opcode::HALT) break;
        pc = next;
      }
    }

    // Form blocks.
    cfg.blocks.clear();
    bool grew = false;
    for (uint32_t start : leaders) {
      if (!code.count(start)) continue;
      CfgBlock b;
      b.start = start;
      uint32_t pc = start;
      std::map<uint8_t, uint32_t> ldi_in_block;
      for (;;) {
        const Instr& in = code.at(pc);
        const uint32_t next = pc + in.size_bytes();
        b.end = next;
        if (is_branch(in.op)) {
          b.succs = {branch_target(in, pc), next};
          break;
        }
        if (in.op == Opcode::JAL) {
          b.succs = {branch_target(in, pc), next};
          break;
        }
        if (in.op == Opcode::JALR) {
          auto it = ldi_in_block.find(in.rs1);
          if (it != ldi_in_block.end()) {
            const uint32_t t = it->second + static_cast<uint32_t>(in.imm);
            b.succs = {t};
            if (!roots.count(t) && try_decode(image, t)) {
              roots.insert(t);
              grew = true;
            }
          } else {
            b.unknown_succs = true;
          }
          break;
        }
        if (in.op == Opcode::IRET || in.op == Opcode::HALT) break;
        if (in.op == Opcode::LDI) {
          ldi_in_block[in.rd] = *in.ext_imm;
        } else if (in.op != Opcode::ST && in.op != Opcode::NOP) {
          ldi_in_block.erase(in.rd);
        }
        if (leaders.count(next) || !code.count(next)) {
          if (code.count(next)) b.succs = {next};
          break;
        }
        pc = next;
      }
      // Drop successors that never decoded.
      std::vector<uint32_t> keep;
      for (uint32_t s : b.succs) {
        if (code.count(s)) keep.push_back(s);
      }
      b.succs = keep;
      cfg.blocks[start] = std::move(b);
    }
    if (!grew) break;
  }
  cfg.entries = roots;
  return cfg;
}

std::optional<uint32_t> distance_to_uncovered(const Cfg& cfg, uint32_t from_block, const std::set<uint32_t>& covered,
                                              const DistanceOptions& opt) {
  if (!cfg.blocks.count(from_block)) return std::nullopt;
  bool any_uncovered = false;
  for (const auto& [start, b] : cfg.blocks) {
    (void)b;
    if (!covered.count(start)) {
      any_uncovered = true;
      break;
    }
  }
  // Dijkstra-free: unit edges via BFS, plus the optional weighted escape.
  std::map<uint32_t, uint32_t> dist{{from_block, 0}};
  std::deque<uint32_t> q{from_block};
  std::optional<uint32_t> best;
  while (!q.empty()) {
    uint32_t u = q.front();
    q.pop_front();
    const uint32_t d = dist[u];
    if (best && d >= *best) continue;
    if (!covered.count(u)) {
      best = d;
      continue;
    }
    const CfgBlock& b = cfg.blocks.at(u);
    if (b.unknown_succs && opt.unknown_edge_cost && any_uncovered) {
      const uint32_t via = d + *opt.unknown_edge_cost;
      if (!best || via < *best) best = via;
    }
    for (uint32_t s : b.succs) {
      if (!dist.count(s)) {
        dist[s] = d + 1;
        q.push_back(s);
      }
    }
  }
  return best;
}

std::map<uint32_t, uint32_t> distances_to_uncovered(const Cfg& cfg, const std::set<uint32_t>& covered,
                                                    const DistanceOptions& opt) {
  std::map<uint32_t, std::vector<uint32_t>> preds;
  for (const auto& [start, b] : cfg.blocks) {
    for (uint32_t s : b.succs) preds[s].push_back(start);
  }
  // Multi-source shortest paths with small integer weights: bucketed BFS.
  std::map<uint32_t, uint32_t> dist;
  std::map<uint32_t, std::vector<uint32_t>> buckets;
  bool any_uncovered = false;
  for (const auto& [start, b] : cfg.blocks) {
    (void)b;
    if (!covered.count(start)) {
      buckets[0].push_back(start);
      any_uncovered = true;
    }
  }
  if (any_uncovered && opt.unknown_edge_cost) {
    for (const auto& [start, b] : cfg.blocks) {
      if (b.unknown_succs && covered.count(start)) buckets[*opt.unknown_edge_cost].push_back(start);
    }
  }
  while (!buckets.empty()) {
    auto it = buckets.begin();
    const uint32_t d = it->first;
    std::vector<uint32_t> nodes = std::move(it->second);
    buckets.erase(it);
    for (uint32_t u : nodes) {
      if (dist.count(u)) continue;
      dist[u] = d;
      // Relaxation only through covered predecessors: an uncovered one is
      // already at distance 0.
      auto p = preds.find(u);
      if (p == preds.end()) continue;
      for (uint32_t v : p->second) {
        if (!dist.count(v)) buckets[d + 1].push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace irqsym
