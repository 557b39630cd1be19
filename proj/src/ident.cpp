#include "irqsym/ident.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

#include "irqsym/error.hpp"
#include "irqsym/machine.hpp"
#include "irqsym/solver.hpp"

namespace irqsym {

GlobalRegion locate_global_region(const FirmwareImage& image, const PeripheralLayout& layout, uint64_t max_steps) {
  MachineState s = MachineState::boot(image, layout);
  std::set<uint32_t> stored;
  for (uint64_t i = 0; i < max_steps && !s.halted; ++i) {
    auto word = image.flash_word(s.pc);
    if (!word) break;
    const Instr in = decode(*word, image.flash_word(s.pc + 4), s.pc);
    if (in.op == Opcode::JAL && in.rd != 0) break;
    StepEvents ev;
    try {
      ev = step_concrete(image, s);
    } catch (const Error&) {
      break;
    }
    if (ev.ram_store) stored.insert(*ev.ram_store & ~3u);
  }
  GlobalRegion region;
  for (uint32_t a : stored) {
    if (!region.ranges.empty() && region.ranges.back().second == a) {
      region.ranges.back().second = a + 4;
    } else {
      region.ranges.emplace_back(a, a + 4);
    }
  }
  if (region.empty()) throw Error(ErrorKind::RegionNotFound, "reset handler initialized no RAM");
  return region;
}

GlobalRegion fallback_region(const FirmwareImage& image) {
  const MemoryMap& m = image.map;
  uint32_t top = image.initial_sp();
  if (top <= m.ram_base || top > m.ram_end()) top = m.ram_end();
  top = top - m.ram_base > kStackReserve ? top - kStackReserve : m.ram_base;
  GlobalRegion r;
  if (top > m.ram_base) r.ranges.emplace_back(m.ram_base, top);
  return r;
}

const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::CONST_ASSIGN: return "CONST_ASSIGN";
    case Pattern::SELF_REFERRAL: return "SELF_REFERRAL";
    case Pattern::DATA_RECEPTION: return "DATA_RECEPTION";
    case Pattern::OTHER: return "OTHER";
  }
  return "?";
}

std::string old_var_name(uint32_t addr) { return "old@" + hex32(addr); }

Pattern classify_pattern(uint32_t var_addr, const Expr& formula) {
  if (!formula.has_vars()) return Pattern::CONST_ASSIGN;
  if (mentions(formula, old_var_name(var_addr))) return Pattern::SELF_REFERRAL;
  if (mentions_origin(formula, Origin::DR)) return Pattern::DATA_RECEPTION;
  return Pattern::OTHER;
}

namespace {

bool writes_reg(const Instr& in, int reg) {
  switch (in.op) {
    case Opcode::LDI:
    case Opcode::LD:
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SHL:
    case Opcode::SHR:
    case Opcode::MOV:
      return in.rd == reg;
    case Opcode::JAL:
    case Opcode::JALR:
      return in.rd != 0 && in.rd == reg;
    case Opcode::IRET:
      return reg == kLinkReg || reg == kStackReg;
    default:
      return false;
  }
}

class Slicer {
 public:
  explicit Slicer(const SymState& p) : path_(p) {}

  Expr reg_before(int reg, size_t j) {
    for (size_t k = j; k-- > 0;) {
      if (writes_reg(path_.trace[k].instr, reg)) return def(k);
    }
    return path_.trace_entry_regs[reg];
  }

  Expr stored_value(size_t st) {
    used_.insert(st);
    return reg_before(path_.trace[st].instr.rs2, st);
  }

  std::vector<size_t> instrs() const { return {used_.begin(), used_.end()}; }

 private:
  Expr def(size_t k) {
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    used_.insert(k);
    const TraceEntry& te = path_.trace[k];
    const Instr& in = te.instr;
    const Expr imm = Expr::constant(static_cast<uint32_t>(in.imm));
    Expr v;
    switch (in.op) {
      case Opcode::LDI: v = Expr::constant(*in.ext_imm); break;
      case Opcode::MOV: v = add(reg_before(in.rs1, k), imm); break;
      case Opcode::ADD: v = add(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::SUB: v = sub(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::AND: v = band(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::OR: v = bor(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::XOR: v = bxor(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::SHL: v = shl(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::SHR: v = shr(reg_before(in.rs1, k), reg_before(in.rs2, k)); break;
      case Opcode::JAL:
      case Opcode::JALR: v = Expr::constant(te.pc + 4); break;
      case Opcode::LD: {
        v = te.loaded;
        for (size_t j = k; j-- > 0;) {
          const TraceEntry& w = path_.trace[j];
          if (w.instr.op == Opcode::ST && w.addr == te.addr) {
            v = stored_value(j);
            break;
          }
        }
        break;
      }
      default:
        // IRET ends the traced ISR; nothing after it reads its results.
        v = te.loaded;
        break;
    }
    memo_.emplace(k, v);
    return v;
  }

  const SymState& path_;
  std::map<size_t, Expr> memo_;
  std::set<size_t> used_;
};

Model probe_bindings(const SymState& path) {
  Model m;
  for (const auto& [name, v] : path.bindings) {
    if (name.rfind("old@", 0) != 0) m[name] = v;
  }
  return m;
}

std::string effect_key(const Effect& e) { return hex32(e.var_addr) + "=" + to_prefix(e.formula); }

std::vector<std::string> effect_keys(const ISRPathRecord& r) {
  std::vector<std::string> keys;
  for (const auto& e : r.effects) keys.push_back(effect_key(e));
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

Slice backward_slice(const SymState& path, size_t index) {
  if (index >= path.trace.size() || path.trace[index].instr.op != Opcode::ST) {
    throw Error(ErrorKind::InvalidConfig, "slice criterion is not a store");
  }
  Slicer s(path);
  Slice out;
  out.formula = s.stored_value(index);
  out.instrs = s.instrs();
  return out;
}

std::vector<Effect> extract_effects(const SymState& path, const GlobalRegion& region) {
  const Model probes = probe_bindings(path);
  std::map<uint32_t, size_t> last_store;
  for (size_t i = 0; i < path.trace.size(); ++i) {
    const TraceEntry& te = path.trace[i];
    if (te.instr.op == Opcode::ST && region.contains(te.addr)) last_store[te.addr] = i;
  }
  std::vector<Effect> out;
  for (uint32_t addr : path.written_globals) {
    if (!region.contains(addr)) continue;
    Expr f;
    if (auto it = last_store.find(addr); it != last_store.end()) {
      f = backward_slice(path, it->second).formula;
    } else {
      f = path.mem_value(addr);
    }
    f = substitute(f, probes);
    if (f.is_var() && f.name() == old_var_name(addr)) continue;
    out.push_back({addr, f, classify_pattern(addr, f)});
  }
  return out;
}

const Effect* ISRPathRecord::effect_on(uint32_t addr) const {
  for (const auto& e : effects) {
    if (e.var_addr == addr) return &e;
  }
  return nullptr;
}

std::vector<ISRPathRecord> filter_paths(std::vector<ISRPathRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const ISRPathRecord& a, const ISRPathRecord& b) {
    return std::tie(a.side_effect_count, a.line, a.sr_value) < std::tie(b.side_effect_count, b.line, b.sr_value);
  });
  std::vector<ISRPathRecord> kept;
  std::vector<std::vector<std::string>> kept_keys;
  for (auto& r : records) {
    const auto keys = effect_keys(r);
    if (std::find(kept_keys.begin(), kept_keys.end(), keys) != kept_keys.end()) continue;

    // Union of every strictly smaller retained record contained in r. Parts
    // must not read globals another part writes, or firing them separately
    // could order-depend.
    std::set<std::string> cover;
    std::set<uint32_t> written;
    std::vector<const ISRPathRecord*> parts;
    for (size_t i = 0; i < kept.size(); ++i) {
      const auto& k = kept_keys[i];
      if (k.size() >= keys.size()) continue;
      if (!std::includes(keys.begin(), keys.end(), k.begin(), k.end())) continue;
      cover.insert(k.begin(), k.end());
      parts.push_back(&kept[i]);
      for (const auto& e : kept[i].effects) written.insert(e.var_addr);
    }
    bool independent = true;
    for (const auto* p : parts) {
      for (const auto& e : p->effects) {
        for (const auto& [name, info] : free_vars(e.formula)) {
          if (name.rfind("old@", 0) == 0 && info.tag != e.var_addr && written.count(info.tag)) independent = false;
        }
      }
    }
    if (independent && !parts.empty() && cover.size() == keys.size()) continue;
    kept_keys.push_back(keys);
    kept.push_back(std::move(r));
  }
  return kept;
}

namespace {

/// SR registers all read the one value the controller stages, so every SR
/// variable on a path must agree.
std::vector<std::string> sr_vars(const std::vector<Expr>& pc, const std::vector<Effect>& effects) {
  std::set<std::string> names;
  auto scan = [&names](const Expr& e) {
    for (const auto& [name, info] : free_vars(e)) {
      if (info.origin == Origin::SR) names.insert(name);
    }
  };
  for (const auto& c : pc) scan(c);
  for (const auto& e : effects) scan(e.formula);
  return {names.begin(), names.end()};
}

}  // namespace

SymState isr_entry_state(const FirmwareImage& image, const SymState& base, int line) {
  SymState s = concretized(base);
  s.halted = false;
  s.in_isr = false;
  s.trace.clear();
  s.written_globals.clear();
  s.mask_tests.clear();
  s.mmio_block_hits.clear();
  s.address_dependent = false;
  s.blocks.clear();
  s.schedule.clear();
  s.skip_site_pc.reset();
  s.nvic.pending = 0;
  s.nvic.active = ActiveIsr{line, std::nullopt, {}};
  const uint32_t sp = s.regs[kStackReg].value() - kFrameBytes;
  s.mem[sp] = Expr::constant(s.pc);
  s.mem[sp + 4] = s.regs[kLinkReg];
  s.mem[sp + 8] = Expr::constant(pack_flags(s.z.value() != 0, s.n.value() != 0));
  s.regs[kStackReg] = Expr::constant(sp);
  s.in_isr = true;
  s.saved_block_start = s.block_start;
  s.block_start = true;
  s.pc = image.vector(line);
  return s;
}

IsrAnalysis analyze_isr(const FirmwareImage& image, const SymState& base, int line, const GlobalRegion& region,
                        const IdentConfig& config) {
  IsrAnalysis out;
  out.line = line;
  out.entry = image.vector(line);
  if (out.entry == 0) {
    out.log.push_back("line " + std::to_string(line) + " has no vector");
    return out;
  }
  uint64_t next_id = 1;
  ExecContext ctx;
  ctx.image = &image;
  ctx.scope = Scope::ISR_ANALYSIS;
  ctx.old_region = &region;
  ctx.trace = true;
  ctx.solver_budget = config.solver_budget;
  ctx.next_id = &next_id;
  ctx.leaders = config.leaders;
  StopWhen stop{StopWhen::Kind::ReturnedFromFrame, 0, config.max_isr_steps};
  PathSet ps = explore(ctx, isr_entry_state(image, base, line), stop, config.path_cap);
  out.paths = ps.live.size();

  std::map<uint32_t, uint64_t> hits;
  auto absorb = [&](const SymState& p) {
    for (const auto& [name, mask] : p.mask_tests) {
      if (name.rfind("sr@", 0) == 0) out.sr_bits |= mask;
      if (name.rfind("cr@", 0) == 0) {
        if (auto reg = mmio_var_addr(name)) out.switches[*reg] |= mask;
      }
    }
    for (const auto& [blk, n] : p.mmio_block_hits) hits[blk] += n;
    out.blocks.insert(p.blocks.begin(), p.blocks.end());
  };
  for (const auto& t : ps.terminated) {
    absorb(t.state);
    out.log.push_back("line " + std::to_string(line) + ": path " + to_string(t.reason) + " at " + hex32(t.state.pc) +
                      (t.detail.empty() ? "" : " (" + t.detail + ")"));
  }

  for (const auto& p : ps.live) {
    absorb(p);
    ISRPathRecord rec;
    rec.line = line;
    rec.effects = extract_effects(p, region);
    rec.side_effect_count = rec.effects.size();
    rec.path_condition = p.path_condition;
    rec.address_dependent = p.address_dependent;

    std::vector<Expr> query = p.path_condition;
    const auto srs = sr_vars(query, rec.effects);
    for (size_t i = 1; i < srs.size(); ++i) {
      query.push_back(eq(Expr::var(srs[0], Origin::SR), Expr::var(srs[i], Origin::SR)));
    }
    std::optional<Model> model;
    if (srs.empty()) {
      SolveResult r = solve(query, config.solver_budget);
      if (r.sat) model = r.model;
    } else {
      model = solve_minimal(query, srs[0], config.solver_budget);
    }
    if (!model) {
      out.log.push_back("line " + std::to_string(line) + ": UnsolvableSRPath, dropped");
      continue;
    }
    rec.sr_value = srs.empty() ? 0 : model->at(srs[0]);
    for (const auto& te : p.trace) {
      if (te.instr.op == Opcode::LD && te.loaded.is_var() && te.loaded.origin() == Origin::DR) {
        auto it = model->find(te.loaded.name());
        rec.dr_witness.push_back(it == model->end() ? 0 : it->second);
      }
    }
    if (rec.effects.empty()) {
      if (!out.null_record || rec.sr_value < out.null_record->sr_value) out.null_record = rec;
      continue;
    }
    out.unfiltered.push_back(std::move(rec));
  }
  out.records = filter_paths(out.unfiltered);

  // Most accessed peripheral block; ties go to the lowest index.
  uint64_t best = 0;
  for (const auto& [blk, n] : hits) {
    if (n > best) {
      best = n;
      out.block = blk;
    }
  }
  return out;
}

std::optional<std::string> replay_record(const FirmwareImage& image, const SymState& base, const ISRPathRecord& rec,
                                         const GlobalRegion& region) {
  MachineState m = to_machine(concretized(base));
  m.in_isr = false;
  m.nvic.active.reset();
  m.nvic.pending = 0;
  Model env;
  for (const auto& e : rec.effects) {
    for (const auto& [name, info] : free_vars(e.formula)) {
      if (name.rfind("old@", 0) == 0) env[name] = m.ram_word(info.tag);
      if (info.origin == Origin::SR) env[name] = rec.sr_value;
    }
  }
  // DR variables take the witness payloads in ordinal order.
  std::vector<std::pair<uint32_t, std::string>> drs;
  for (const auto& e : rec.effects) {
    for (const auto& [name, info] : free_vars(e.formula)) {
      if (info.origin == Origin::DR) drs.emplace_back(std::stoul(name.substr(3)), name);
    }
  }
  std::sort(drs.begin(), drs.end());
  drs.erase(std::unique(drs.begin(), drs.end()), drs.end());
  const uint32_t base_ordinal = concretized(base).dr_counter;
  for (const auto& [ordinal, name] : drs) {
    const size_t i = ordinal - base_ordinal;
    env[name] = i < rec.dr_witness.size() ? rec.dr_witness[i] : 0;
  }

  std::map<uint32_t, uint32_t> before;
  for (const auto& [lo, hi] : region.ranges) {
    for (uint32_t a = lo; a < hi; a += 4) before[a] = m.ram_word(a);
  }
  try {
    fire_and_run_isr(image, m, rec.line, rec.sr_value, rec.dr_witness, 100000, !m.nvic.line_enabled(rec.line));
  } catch (const Error& e) {
    return std::string("replay failed: ") + e.what();
  }
  for (const auto& [a, old] : before) {
    const Effect* eff = rec.effect_on(a);
    const uint32_t want = eff ? eval(eff->formula, env) : old;
    const uint32_t got = m.ram_word(a);
    if (want != got) return hex32(a) + ": expected " + hex32(want) + ", got " + hex32(got);
  }
  return std::nullopt;
}

void InterruptModelTable::replace_line(LineModel model) {
  model.epoch = ++epoch_;
  const int line = model.analysis.line;
  lines_[line] = std::move(model);
  reindex();
}

void InterruptModelTable::reindex() {
  index_.clear();
  for (const auto& [line, lm] : lines_) {
    for (size_t i = 0; i < lm.analysis.records.size(); ++i) {
      for (const auto& e : lm.analysis.records[i].effects) index_[e.var_addr].emplace_back(line, i);
    }
  }
  for (auto& [addr, refs] : index_) {
    std::sort(refs.begin(), refs.end(), [this](const auto& a, const auto& b) {
      const auto& ra = lines_.at(a.first).analysis.records[a.second];
      const auto& rb = lines_.at(b.first).analysis.records[b.second];
      return std::tie(ra.side_effect_count, ra.line, ra.sr_value) < std::tie(rb.side_effect_count, rb.line, rb.sr_value);
    });
  }
}

std::vector<const ISRPathRecord*> InterruptModelTable::lookup(uint32_t var_addr) const {
  auto it = index_.find(var_addr);
  if (it == index_.end()) throw Error(ErrorKind::NoModelForVariable, hex32(var_addr));
  std::vector<const ISRPathRecord*> out;
  for (const auto& [line, i] : it->second) out.push_back(&lines_.at(line).analysis.records[i]);
  return out;
}

std::vector<uint32_t> InterruptModelTable::variables() const {
  std::vector<uint32_t> out;
  for (const auto& [addr, refs] : index_) out.push_back(addr);
  return out;
}

const LineModel* InterruptModelTable::line(int l) const {
  auto it = lines_.find(l);
  return it == lines_.end() ? nullptr : &it->second;
}

size_t InterruptModelTable::record_count() const {
  size_t n = 0;
  for (const auto& [line, lm] : lines_) n += lm.analysis.records.size();
  return n;
}

nlohmann::json InterruptModelTable::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& [addr, refs] : index_) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto* r : lookup(addr)) {
      const Effect* e = r->effect_on(addr);
      nlohmann::json side = nlohmann::json::array();
      for (const auto& x : r->effects) side.push_back(hex32(x.var_addr));
      recs.push_back({{"line", r->line},
                      {"sr_value", hex32(r->sr_value)},
                      {"pattern", to_string(e->pattern)},
                      {"formula", to_prefix(e->formula)},
                      {"side_effects", side}});
    }
    doc.push_back({{"var_addr", hex32(addr)}, {"records", recs}});
  }
  return doc;
}

InterruptIdentifier::InterruptIdentifier(const FirmwareImage& image, GlobalRegion region, IdentConfig config)
    : image_(&image), region_(std::move(region)), config_(config) {}

void InterruptIdentifier::analyze(int line, const SymState& state) {
  LineModel lm;
  lm.analysis = analyze_isr(*image_, state, line, region_, config_);
  ++analyses_;
  lm.base = concretized(state);
  if (lm.analysis.block) lm.config = state.periph.block_config(*lm.analysis.block);
  blocks_.insert(lm.analysis.blocks.begin(), lm.analysis.blocks.end());
  log_.insert(log_.end(), lm.analysis.log.begin(), lm.analysis.log.end());
  log_.push_back("analyzed line " + std::to_string(line) + ": " + std::to_string(lm.analysis.records.size()) +
                 " records from " + std::to_string(lm.analysis.paths) + " paths");
  if (lm.analysis.block) {
    const uint32_t blk = *lm.analysis.block;
    const auto before = deferred_.size();
    std::erase_if(deferred_, [blk](const CrBitEnabled& e) { return e.block == blk; });
    if (deferred_.size() != before) log_.push_back("resolved deferred events for block " + std::to_string(blk));
  }
  table_.replace_line(std::move(lm));
}

void InterruptIdentifier::reanalyze(int line, const SymState& state) { analyze(line, state); }

std::vector<int> InterruptIdentifier::on_trigger(const TriggerEvent& ev, const SymState& state) {
  std::vector<int> done;
  if (const auto* le = std::get_if<LineEnabled>(&ev)) {
    if (image_->vector(le->line) == 0) {
      log_.push_back("line " + std::to_string(le->line) + " enabled without a vector");
      return done;
    }
    if (const LineModel* lm = table_.line(le->line)) {
      const bool same = !lm->analysis.block || state.periph.block_config(*lm->analysis.block) == lm->config;
      if (same) return done;
    }
    analyze(le->line, state);
    done.push_back(le->line);
    return done;
  }
  const auto& cr = std::get<CrBitEnabled>(ev);
  for (const auto& [line, lm] : table_.lines()) {
    if (lm.analysis.block == cr.block && state.periph.block_config(cr.block) != lm.config) done.push_back(line);
  }
  bool associated = false;
  for (const auto& [line, lm] : table_.lines()) associated |= lm.analysis.block == cr.block;
  if (!associated) {
    log_.push_back("UnassociatedPeripheral: block " + std::to_string(cr.block) + " bit " + std::to_string(cr.bit) +
                   ", deferred");
    deferred_.push_back(cr);
    return done;
  }
  for (int line : done) analyze(line, state);
  return done;
}

}  // namespace irqsym
