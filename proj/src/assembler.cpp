#include "irqsym/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>
#include <vector>

#include "irqsym/error.hpp"

namespace irqsym {

uint32_t AsmUnit::symbol(const std::string& name) const {
  auto it = symbols.find(name);
  if (it == symbols.end()) throw Error(ErrorKind::UndefinedLabel, name);
  return it->second;
}

namespace {

struct Stmt {
  int line = 0;
  std::string op;  // upper-case mnemonic or lower-case directive
  std::vector<std::string> args;
  uint32_t addr = 0;
};

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string where(int line) { return "line " + std::to_string(line); }

[[noreturn]] void syntax(int line, const std::string& msg) {
  throw Error(ErrorKind::SyntaxError, where(line) + ": " + msg);
}

bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

std::vector<std::string> split_args(const std::string& s, int line) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) syntax(line, "unbalanced brackets");
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  for (const auto& a : out) {
    if (a.empty()) syntax(line, "empty operand");
  }
  return out;
}

class Assembler {
 public:
  explicit Assembler(MemoryMap map) : map_(map) {}

  AsmUnit run(const std::string& source) {
    parse(source);
    pass1();
    pass2();
    AsmUnit unit;
    unit.symbols = symbols_;
    unit.layout = layout_;
    unit.image.map = map_;
    uint32_t top = kVectorSlots;
    if (!words_.empty()) top = std::max(top, (words_.rbegin()->first - map_.flash_base) / 4 + 1);
    unit.image.words.assign(top, 0);
    for (const auto& [addr, w] : words_) unit.image.words[(addr - map_.flash_base) / 4] = w;
    unit.image.words[0] = sp_;
    unit.image.words[1] = reset_;
    for (const auto& [line, target] : vectors_) unit.image.words[2 + line] = target;
    return unit;
  }

 private:
  void parse(const std::string& source) {
    std::istringstream in(source);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (auto c = raw.find(';'); c != std::string::npos) raw.resize(c);
      std::string text = trim(raw);
      while (true) {
        auto colon = text.find(':');
        if (colon == std::string::npos) break;
        std::string label = trim(text.substr(0, colon));
        if (!is_ident(label)) break;
        stmts_.push_back({line, ":", {label}, 0});
        text = trim(text.substr(colon + 1));
      }
      if (text.empty()) continue;
      size_t sp = 0;
      while (sp < text.size() && !std::isspace(static_cast<unsigned char>(text[sp]))) ++sp;
      Stmt st;
      st.line = line;
      st.op = text.substr(0, sp);
      st.op = st.op[0] == '.' ? st.op : upper(st.op);
      st.args = split_args(trim(text.substr(sp)), line);
      stmts_.push_back(std::move(st));
    }
  }

  void define(const std::string& name, uint32_t value, int line) {
    if (!symbols_.emplace(name, value).second) {
      throw Error(ErrorKind::DuplicateLabel, where(line) + ": " + name);
    }
  }

  uint32_t eval(const std::string& expr, int line) const {
    std::string e = expr;
    if (!e.empty() && e[0] == '#') e = e.substr(1);
    if (e.empty()) syntax(line, "empty expression");
    uint32_t total = 0;
    size_t i = 0;
    bool negate = false;
    if (e[0] == '-' || e[0] == '+') {
      negate = e[0] == '-';
      i = 1;
    }
    while (i <= e.size()) {
      size_t j = i;
      while (j < e.size() && e[j] != '+' && e[j] != '-') ++j;
      std::string term = trim(e.substr(i, j - i));
      uint32_t v = term_value(term, line);
      total = negate ? total - v : total + v;
      if (j >= e.size()) break;
      negate = e[j] == '-';
      i = j + 1;
    }
    return total;
  }

  uint32_t term_value(const std::string& t, int line) const {
    if (t.empty()) syntax(line, "empty term");
    if (std::isdigit(static_cast<unsigned char>(t[0]))) {
      int base = 10;
      const char* b = t.data();
      const char* e = b + t.size();
      if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        base = 16;
        b += 2;
      } else if (t.size() > 2 && t[0] == '0' && (t[1] == 'b' || t[1] == 'B')) {
        base = 2;
        b += 2;
      }
      uint64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v, base);
      if (ec != std::errc() || p != e) syntax(line, "bad number '" + t + "'");
      if (v > 0xFFFF'FFFFull) throw Error(ErrorKind::RangeError, where(line) + ": " + t);
      return static_cast<uint32_t>(v);
    }
    if (!is_ident(t)) syntax(line, "bad operand '" + t + "'");
    auto it = symbols_.find(t);
    if (it == symbols_.end()) throw Error(ErrorKind::UndefinedLabel, where(line) + ": " + t);
    return it->second;
  }

  static std::optional<uint8_t> reg_of(const std::string& s) {
    std::string l;
    for (char c : s) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l == "lr") return kLinkReg;
    if (l == "sp") return kStackReg;
    if (l.size() < 2 || l[0] != 'r') return std::nullopt;
    int v = 0;
    auto [p, ec] = std::from_chars(l.data() + 1, l.data() + l.size(), v);
    if (ec != std::errc() || p != l.data() + l.size() || v < 0 || v >= kNumRegs) return std::nullopt;
    return static_cast<uint8_t>(v);
  }

  uint8_t reg(const Stmt& st, size_t i) const {
    auto r = reg_of(st.args.at(i));
    if (!r) syntax(st.line, "expected register, got '" + st.args[i] + "'");
    return *r;
  }

  void arity(const Stmt& st, size_t lo, size_t hi) const {
    if (st.args.size() < lo || st.args.size() > hi) {
      syntax(st.line, st.op + " takes " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                          " operands");
    }
  }

  int32_t imm12(int64_t v, int line) const {
    if (v < -2048 || v > 2047) throw Error(ErrorKind::RangeError, where(line) + ": immediate " + std::to_string(v));
    return static_cast<int32_t>(v);
  }

  int32_t signed_imm(const std::string& e, int line) const {
    return imm12(static_cast<int32_t>(eval(e, line)), line);
  }

  // "[rN]" or "[rN, expr]"
  std::pair<uint8_t, int32_t> mem_operand(const Stmt& st, const std::string& a) const {
    if (a.size() < 3 || a.front() != '[' || a.back() != ']') syntax(st.line, "expected [reg, offset]");
    auto parts = split_args(a.substr(1, a.size() - 2), st.line);
    if (parts.empty() || parts.size() > 2) syntax(st.line, "expected [reg, offset]");
    auto r = reg_of(parts[0]);
    if (!r) syntax(st.line, "expected base register");
    int32_t off = parts.size() == 2 ? signed_imm(parts[1], st.line) : 0;
    return {*r, off};
  }

  int32_t rel_words(const std::string& target, uint32_t pc, int line) const {
    const int64_t delta = static_cast<int64_t>(static_cast<int32_t>(eval(target, line) - (pc + 4)));
    if (delta % 4 != 0) throw Error(ErrorKind::RangeError, where(line) + ": misaligned target");
    return imm12(delta / 4, line);
  }

  uint32_t size_of(const Stmt& st) const {
    if (st.op == ".word") return 4 * static_cast<uint32_t>(st.args.size());
    if (st.op[0] == '.' || st.op == ":") return 0;
    return st.op == "LDI" ? 8 : 4;
  }

  void pass1() {
    uint32_t loc = map_.flash_base + kDefaultCodeOrigin;
    for (auto& st : stmts_) {
      if (st.op == ":") {
        define(st.args[0], loc, st.line);
      } else if (st.op == ".org") {
        arity(st, 1, 1);
        loc = eval(st.args[0], st.line);
        if (loc % 4) throw Error(ErrorKind::RangeError, where(st.line) + ": unaligned .org");
      } else if (st.op == ".equ") {
        arity(st, 2, 2);
        if (!is_ident(st.args[0])) syntax(st.line, "bad .equ name");
        define(st.args[0], eval(st.args[1], st.line), st.line);
      }
      st.addr = loc;
      loc += size_of(st);
    }
  }

  void emit(uint32_t addr, uint32_t w, int line) {
    if (!map_.in_flash(addr)) throw Error(ErrorKind::RangeError, where(line) + ": outside flash " + hex32(addr));
    if (addr < map_.flash_base + kVectorSlots * 4) {
      throw Error(ErrorKind::RangeError, where(line) + ": code overlaps the vector table");
    }
    if (!words_.emplace(addr, w).second) throw Error(ErrorKind::RangeError, where(line) + ": overlapping output");
  }

  void pass2() {
    for (const auto& st : stmts_) {
      if (st.op == ":" || st.op == ".org" || st.op == ".equ") continue;
      if (st.op[0] == '.') {
        directive(st);
        continue;
      }
      Instr in = instruction(st);
      auto ws = encode(in);
      for (size_t i = 0; i < ws.size(); ++i) emit(st.addr + 4 * static_cast<uint32_t>(i), ws[i], st.line);
    }
  }

  void directive(const Stmt& st) {
    if (st.op == ".word") {
      for (size_t i = 0; i < st.args.size(); ++i) emit(st.addr + 4 * static_cast<uint32_t>(i), eval(st.args[i], st.line), st.line);
    } else if (st.op == ".sp") {
      arity(st, 1, 1);
      sp_ = eval(st.args[0], st.line);
    } else if (st.op == ".reset") {
      arity(st, 1, 1);
      reset_ = eval(st.args[0], st.line);
    } else if (st.op == ".vector") {
      arity(st, 2, 2);
      uint32_t line = eval(st.args[0], st.line);
      if (line >= static_cast<uint32_t>(kNumLines)) throw Error(ErrorKind::RangeError, where(st.line) + ": vector line");
      vectors_[line] = eval(st.args[1], st.line);
    } else if (st.op == ".periph") {
      arity(st, 3, 5);
      PeripheralLayout::Entry e;
      e.block = eval(st.args[0], st.line);
      e.offset = eval(st.args[1], st.line);
      auto cat = regcat_from_string(upper(st.args[2]));
      if (!cat || *cat == RegCat::Unknown) syntax(st.line, "bad register category");
      e.category.cat = *cat;
      if (*cat == RegCat::CSR) {
        arity(st, 5, 5);
        e.category.cr_mask = eval(st.args[3], st.line);
        e.category.sr_mask = eval(st.args[4], st.line);
      } else {
        arity(st, 3, 3);
      }
      layout_.entries.push_back(e);
    } else {
      syntax(st.line, "unknown directive " + st.op);
    }
  }

  Instr instruction(const Stmt& st) const {
    Instr in;
    const std::string& m = st.op;
    if (m == "J") {
      arity(st, 1, 1);
      in.op = Opcode::JAL;
      in.imm = rel_words(st.args[0], st.addr, st.line);
      return in;
    }
    if (m == "CALL") {
      arity(st, 1, 1);
      in.op = Opcode::JAL;
      in.rd = kLinkReg;
      in.imm = rel_words(st.args[0], st.addr, st.line);
      return in;
    }
    if (m == "RET") {
      arity(st, 0, 0);
      in.op = Opcode::JALR;
      in.rs1 = kLinkReg;
      return in;
    }
    auto op = opcode_from_mnemonic(m);
    if (!op) syntax(st.line, "unknown mnemonic " + m);
    in.op = *op;
    switch (*op) {
      case Opcode::NOP:
      case Opcode::IRET:
      case Opcode::HALT: arity(st, 0, 0); break;
      case Opcode::LDI:
        arity(st, 2, 2);
        in.rd = reg(st, 0);
        in.ext_imm = eval(st.args[1], st.line);
        break;
      case Opcode::LD: {
        arity(st, 2, 2);
        in.rd = reg(st, 0);
        auto [base, off] = mem_operand(st, st.args[1]);
        in.rs1 = base;
        in.imm = off;
        break;
      }
      case Opcode::ST: {
        arity(st, 2, 2);
        in.rs2 = reg(st, 0);
        auto [base, off] = mem_operand(st, st.args[1]);
        in.rs1 = base;
        in.imm = off;
        break;
      }
      case Opcode::MOV:
        arity(st, 2, 3);
        in.rd = reg(st, 0);
        in.rs1 = reg(st, 1);
        if (st.args.size() == 3) in.imm = signed_imm(st.args[2], st.line);
        break;
      case Opcode::BEQ:
      case Opcode::BNE:
      case Opcode::BLT:
      case Opcode::BGE:
        arity(st, 3, 3);
        in.rs1 = reg(st, 0);
        in.rs2 = reg(st, 1);
        in.imm = rel_words(st.args[2], st.addr, st.line);
        break;
      case Opcode::JAL:
        arity(st, 2, 2);
        in.rd = reg(st, 0);
        in.imm = rel_words(st.args[1], st.addr, st.line);
        break;
      case Opcode::JALR:
        arity(st, 2, 3);
        in.rd = reg(st, 0);
        in.rs1 = reg(st, 1);
        if (st.args.size() == 3) in.imm = signed_imm(st.args[2], st.line);
        break;
      default:  // three-register ALU
        arity(st, 3, 3);
        in.rd = reg(st, 0);
        in.rs1 = reg(st, 1);
        in.rs2 = reg(st, 2);
        break;
    }
    return in;
  }

  MemoryMap map_;
  std::vector<Stmt> stmts_;
  std::map<std::string, uint32_t> symbols_;
  std::map<uint32_t, uint32_t> words_;
  std::map<uint32_t, uint32_t> vectors_;
  PeripheralLayout layout_;
  uint32_t sp_ = kDefaultInitialSp;
  uint32_t reset_ = 0;
};

}  // namespace

AsmUnit assemble_unit(const std::string& source, MemoryMap map) { return Assembler(map).run(source); }

}  // namespace irqsym
