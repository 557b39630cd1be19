#include "irqsym/mmio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "irqsym/error.hpp"

namespace irqsym {

namespace {

constexpr size_t kLogCap = 64;

std::string probe_name(const char* prefix, uint32_t addr, uint32_t version) {
  return std::string(prefix) + "@" + hex32(addr) + ".v" + std::to_string(version);
}

uint32_t parse_u32(const std::string& tok, int line_no) {
  uint32_t v = 0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    b += 2;
    base = 16;
  }
  auto [p, ec] = std::from_chars(b, e, v, base);
  if (ec != std::errc() || p != e) {
    throw Error(ErrorKind::InvalidConfig, "layout line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
  return v;
}

}  // namespace

const char* to_string(RegCat c) {
  switch (c) {
    case RegCat::Unknown: return "UNKNOWN";
    case RegCat::CR: return "CR";
    case RegCat::SR: return "SR";
    case RegCat::DR: return "DR";
    case RegCat::CSR: return "CSR";
  }
  return "?";
}

std::optional<RegCat> regcat_from_string(const std::string& s) {
  if (s == "CR") return RegCat::CR;
  if (s == "SR") return RegCat::SR;
  if (s == "DR") return RegCat::DR;
  if (s == "CSR") return RegCat::CSR;
  if (s == "UNKNOWN") return RegCat::Unknown;
  return std::nullopt;
}

const char* to_string(Scope s) {
  switch (s) {
    case Scope::BOOT: return "BOOT";
    case Scope::ISR_ANALYSIS: return "ISR_ANALYSIS";
    case Scope::LOCAL: return "LOCAL";
    case Scope::GLOBAL_DSE: return "GLOBAL_DSE";
  }
  return "?";
}

void AccessSummary::add(const Access& a) {
  switch (a.kind) {
    case Access::Kind::Read: read = true; break;
    case Access::Kind::Write:
      written = true;
      written_bits |= a.value;
      break;
    case Access::Kind::BitTest: tested_bits |= a.value; break;
    case Access::Kind::Store: stored = true; break;
  }
}

RegisterCategory classify(const AccessSummary& s) {
  const uint32_t untested_by_write = s.tested_bits & ~s.written_bits;
  if (s.written && !s.stored && untested_by_write == 0) return {RegCat::CR, 0, 0};
  if (s.read && s.tested_bits != 0 && !s.written) return {RegCat::SR, 0, 0};
  if (s.read && s.stored && s.tested_bits == 0) return {RegCat::DR, 0, 0};
  // Bits both written and tested count as control bits.
  if (s.written && untested_by_write != 0) return {RegCat::CSR, s.written_bits, untested_by_write};
  return {};
}

RegisterCategory classify(const std::vector<Access>& log) {
  AccessSummary s;
  for (const auto& a : log) s.add(a);
  return classify(s);
}

std::string sr_var_name(uint32_t addr) { return "sr@" + hex32(addr); }

std::string dr_var_name(uint32_t ordinal, uint32_t addr) {
  return "dr#" + std::to_string(ordinal) + "@" + hex32(addr);
}

std::optional<uint32_t> mmio_var_addr(const std::string& name) {
  const bool mmio = name.starts_with("sr@") || name.starts_with("dr#") || name.starts_with("cr@") ||
                    name.starts_with("mmio@");
  if (!mmio) return std::nullopt;
  auto at = name.find('@');
  if (at == std::string::npos || name.size() < at + 11) return std::nullopt;
  uint32_t v = 0;
  const char* b = name.data() + at + 3;  // skip "@0x"
  auto [p, ec] = std::from_chars(b, b + 8, v, 16);
  if (ec != std::errc() || p != b + 8) return std::nullopt;
  return v;
}

PeripheralLayout PeripheralLayout::parse(const std::string& text) {
  PeripheralLayout out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 5) {
      throw Error(ErrorKind::InvalidConfig, "layout line " + std::to_string(line_no) + ": expected 3 or 5 fields");
    }
    Entry e;
    e.block = parse_u32(tok[0], line_no);
    e.offset = parse_u32(tok[1], line_no);
    auto cat = regcat_from_string(tok[2]);
    if (!cat || *cat == RegCat::Unknown) {
      throw Error(ErrorKind::InvalidConfig, "layout line " + std::to_string(line_no) + ": bad category '" + tok[2] + "'");
    }
    e.category.cat = *cat;
    if (tok.size() == 5) {
      if (*cat != RegCat::CSR) {
        throw Error(ErrorKind::InvalidConfig, "layout line " + std::to_string(line_no) + ": masks only for CSR");
      }
      e.category.cr_mask = parse_u32(tok[3], line_no);
      e.category.sr_mask = parse_u32(tok[4], line_no);
      if (e.category.cr_mask & e.category.sr_mask) {
        throw Error(ErrorKind::InvalidConfig, "layout line " + std::to_string(line_no) + ": overlapping masks");
      }
    }
    out.entries.push_back(e);
  }
  return out;
}

PeripheralLayout PeripheralLayout::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot open layout " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string PeripheralLayout::to_text() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << e.block << " " << hex32(e.offset) << " " << to_string(e.category.cat);
    if (e.category.cat == RegCat::CSR) out << " " << hex32(e.category.cr_mask) << " " << hex32(e.category.sr_mask);
    out << "\n";
  }
  return out.str();
}

void PeripheralMap::declare(uint32_t addr, RegisterCategory cat) {
  Reg& r = reg(addr);
  r.category = cat;
  r.declared = true;
}

void PeripheralMap::apply_layout(const PeripheralLayout& layout) {
  for (const auto& e : layout.entries) {
    declare(map_.periph_base + e.block * map_.periph_block_size + e.offset, e.category);
  }
}

RegisterCategory PeripheralMap::category(uint32_t addr) const {
  auto it = regs_.find(addr);
  return it == regs_.end() ? RegisterCategory{} : it->second.category;
}

bool PeripheralMap::declared(uint32_t addr) const {
  auto it = regs_.find(addr);
  return it != regs_.end() && it->second.declared;
}

uint32_t PeripheralMap::stored_value(uint32_t addr) const {
  auto it = regs_.find(addr);
  return it == regs_.end() ? 0 : it->second.stored;
}

const std::vector<Access>& PeripheralMap::access_log(uint32_t addr) const {
  static const std::vector<Access> empty;
  auto it = regs_.find(addr);
  return it == regs_.end() ? empty : it->second.log;
}

void PeripheralMap::log_access(uint32_t addr, Access a) {
  Reg& r = reg(addr);
  if (r.log.size() < kLogCap) r.log.push_back(a);
  const AccessSummary before = r.summary;
  r.summary.add(a);
  if (!r.declared && !(before == r.summary)) reclassify(addr);
}

void PeripheralMap::reclassify(uint32_t addr) {
  Reg& r = reg(addr);
  RegisterCategory next = classify(r.summary);
  if (next == r.category) return;
  if (r.category.cat != RegCat::Unknown) recats_.push_back({addr, r.category, next});
  r.category = next;
}

Expr PeripheralMap::sr_part(uint32_t addr, const ReadContext& ctx) const {
  if (ctx.active && ctx.active->sr) return Expr::constant(*ctx.active->sr);
  if (ctx.scope == Scope::ISR_ANALYSIS && !ctx.concrete) return Expr::var(sr_var_name(addr), Origin::SR, addr);
  return Expr::constant(0);
}

Expr PeripheralMap::dr_value(uint32_t addr, ReadContext& ctx) const {
  if (ctx.active && !ctx.active->dr.empty()) {
    uint32_t v = ctx.active->dr.front();
    ctx.active->dr.pop_front();
    return Expr::constant(v);
  }
  uint32_t ordinal = 0;
  if (ctx.dr_counter) ordinal = (*ctx.dr_counter)++;
  if (ctx.concrete) {
    if (ctx.dr_inputs && ordinal < ctx.dr_inputs->size()) return Expr::constant((*ctx.dr_inputs)[ordinal]);
    return Expr::constant(0);
  }
  if (ctx.scope == Scope::GLOBAL_DSE || ctx.scope == Scope::ISR_ANALYSIS) {
    return Expr::var(dr_var_name(ordinal, addr), Origin::DR, addr);
  }
  return Expr::constant(0);
}

ReadResult PeripheralMap::read(uint32_t addr, ReadContext& ctx) {
  log_access(addr, {Access::Kind::Read, 0});
  Reg& r = reg(addr);
  const RegisterCategory cat = r.category;
  switch (cat.cat) {
    case RegCat::CR:
      if (ctx.scope == Scope::ISR_ANALYSIS && !ctx.concrete) {
        std::string name = probe_name("cr", addr, r.version);
        return {Expr::var(name, Origin::PROBE, addr), std::make_pair(name, r.stored)};
      }
      return {Expr::constant(r.stored), std::nullopt};
    case RegCat::SR:
      return {sr_part(addr, ctx), std::nullopt};
    case RegCat::DR:
      return {dr_value(addr, ctx), std::nullopt};
    case RegCat::CSR: {
      Expr control = Expr::constant(r.stored & ~cat.sr_mask);
      if (ctx.scope == Scope::ISR_ANALYSIS && !ctx.concrete) {
        std::string name = probe_name("cr", addr, r.version);
        ReadResult out{band(Expr::var(name, Origin::PROBE, addr), Expr::constant(~cat.sr_mask)),
                       std::make_pair(name, r.stored)};
        out.value = bor(out.value, band(sr_part(addr, ctx), Expr::constant(cat.sr_mask)));
        return out;
      }
      return {bor(control, band(sr_part(addr, ctx), Expr::constant(cat.sr_mask))), std::nullopt};
    }
    case RegCat::Unknown:
      if (ctx.concrete) return {Expr::constant(r.stored), std::nullopt};
      {
        std::string name = probe_name("mmio", addr, r.version);
        return {Expr::var(name, Origin::PROBE, addr), std::make_pair(name, r.stored)};
      }
  }
  return {Expr::constant(0), std::nullopt};
}

std::vector<CrBitEnabled> PeripheralMap::write(uint32_t addr, uint32_t value) {
  Reg& before = reg(addr);
  const uint32_t old = before.stored;
  before.stored = value;
  before.ever_written = true;
  ++before.version;
  log_access(addr, {Access::Kind::Write, value});

  const RegisterCategory cat = category(addr);
  uint32_t watched = 0;
  switch (cat.cat) {
    case RegCat::CR:
    case RegCat::Unknown: watched = ~0u; break;
    case RegCat::CSR: watched = cat.cr_mask; break;
    default: break;
  }
  std::vector<CrBitEnabled> out;
  const uint32_t rising = value & ~old & watched;
  const uint32_t block = map_.periph_block(addr);
  const uint32_t offset = (addr - map_.periph_base) % map_.periph_block_size;
  for (int bit = 0; bit < 32; ++bit) {
    if ((rising >> bit) & 1u) out.push_back({block, offset, bit});
  }
  return out;
}

void PeripheralMap::observe_bit_test(uint32_t addr, uint32_t mask) {
  if (mask != 0) log_access(addr, {Access::Kind::BitTest, mask});
}

void PeripheralMap::observe_store(uint32_t addr) { log_access(addr, {Access::Kind::Store, 0}); }

std::map<uint32_t, uint32_t> PeripheralMap::block_config(uint32_t block) const {
  std::map<uint32_t, uint32_t> out;
  const uint32_t lo = map_.periph_base + block * map_.periph_block_size;
  const uint32_t hi = lo + map_.periph_block_size;
  for (auto it = regs_.lower_bound(lo); it != regs_.end() && it->first < hi; ++it) {
    const RegCat c = it->second.category.cat;
    if (c == RegCat::CR || c == RegCat::CSR || c == RegCat::Unknown) out[it->first] = it->second.stored;
  }
  return out;
}

}  // namespace irqsym
