#include "irqsym/isa.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

namespace irqsym {

namespace {

struct OpInfo {
  Opcode op;
  const char* name;
};

constexpr std::array<OpInfo, 20> kOps{{
    {Opcode::NOP, "NOP"},   {Opcode::LDI, "LDI"},   {Opcode::LD, "LD"},     {Opcode::ST, "ST"},
    {Opcode::ADD, "ADD"},   {Opcode::SUB, "SUB"},   {Opcode::AND, "AND"},   {Opcode::OR, "OR"},
    {Opcode::XOR, "XOR"},   {Opcode::SHL, "SHL"},   {Opcode::SHR, "SHR"},   {Opcode::MOV, "MOV"},
    {Opcode::BEQ, "BEQ"},   {Opcode::BNE, "BNE"},   {Opcode::BLT, "BLT"},   {Opcode::BGE, "BGE"},
    {Opcode::JAL, "JAL"},   {Opcode::JALR, "JALR"}, {Opcode::IRET, "IRET"}, {Opcode::HALT, "HALT"},
}};

}  // namespace

std::optional<Opcode> opcode_from_byte(uint8_t b) {
  for (const auto& o : kOps) {
    if (static_cast<uint8_t>(o.op) == b) return o.op;
  }
  return std::nullopt;
}

const char* mnemonic(Opcode op) {
  for (const auto& o : kOps) {
    if (o.op == op) return o.name;
  }
  return "?";
}

std::optional<Opcode> opcode_from_mnemonic(const std::string& name) {
  for (const auto& o : kOps) {
    if (name == o.name) return o.op;
  }
  return std::nullopt;
}

bool is_branch(Opcode op) {
  return op == Opcode::BEQ || op == Opcode::BNE || op == Opcode::BLT || op == Opcode::BGE;
}

bool is_alu(Opcode op) {
  switch (op) {
    case Opcode::ADD: case Opcode::SUB: case Opcode::AND: case Opcode::OR:
    case Opcode::XOR: case Opcode::SHL: case Opcode::SHR:
      return true;
    default:
      return false;
  }
}

bool ends_block(Opcode op) {
  return is_branch(op) || op == Opcode::JAL || op == Opcode::JALR || op == Opcode::IRET ||
         op == Opcode::HALT;
}

std::string to_string(const Instr& in) {
  std::ostringstream os;
  os << mnemonic(in.op);
  auto r = [](int i) { return "r" + std::to_string(i); };
  switch (in.op) {
    case Opcode::NOP: case Opcode::IRET: case Opcode::HALT:
      break;
    case Opcode::LDI:
      os << ' ' << r(in.rd) << ", " << hex32(in.ext_imm.value_or(0));
      break;
    case Opcode::LD:
      os << ' ' << r(in.rd) << ", [" << r(in.rs1) << ", " << in.imm << ']';
      break;
    case Opcode::ST:
      os << ' ' << r(in.rs2) << ", [" << r(in.rs1) << ", " << in.imm << ']';
      break;
    case Opcode::MOV:
      os << ' ' << r(in.rd) << ", " << r(in.rs1) << ", " << in.imm;
      break;
    case Opcode::BEQ: case Opcode::BNE: case Opcode::BLT: case Opcode::BGE:
      os << ' ' << r(in.rs1) << ", " << r(in.rs2) << ", " << in.imm;
      break;
    case Opcode::JAL:
      os << ' ' << r(in.rd) << ", " << in.imm;
      break;
    case Opcode::JALR:
      os << ' ' << r(in.rd) << ", " << r(in.rs1) << ", " << in.imm;
      break;
    default:
      os << ' ' << r(in.rd) << ", " << r(in.rs1) << ", " << r(in.rs2);
  }
  return os.str();
}

std::vector<uint32_t> encode(const Instr& in) {
  if (in.rd >= kNumRegs || in.rs1 >= kNumRegs || in.rs2 >= kNumRegs) {
    throw Error(ErrorKind::RangeError, "register index out of range in " + to_string(in));
  }
  if (in.imm < -2048 || in.imm > 2047) {
    throw Error(ErrorKind::RangeError, "immediate " + std::to_string(in.imm) + " does not fit 12 bits");
  }
  uint32_t w = (static_cast<uint32_t>(in.op) << 24) | (uint32_t{in.rd} << 20) |
               (uint32_t{in.rs1} << 16) | (uint32_t{in.rs2} << 12) |
               (static_cast<uint32_t>(in.imm) & 0xFFFu);
  if (in.op == Opcode::LDI) return {w, in.ext_imm.value_or(0)};
  return {w};
}

Instr decode(uint32_t word, std::optional<uint32_t> next_word, uint32_t addr) {
  auto op = opcode_from_byte(static_cast<uint8_t>(word >> 24));
  if (!op) throw Error(ErrorKind::UnknownOpcode, "at " + hex32(addr) + " word " + hex32(word));
  Instr in;
  in.op = *op;
  in.rd = (word >> 20) & 0xF;
  in.rs1 = (word >> 16) & 0xF;
  in.rs2 = (word >> 12) & 0xF;
  uint32_t raw = word & 0xFFF;
  in.imm = (raw & 0x800) ? static_cast<int32_t>(raw | 0xFFFFF000u) : static_cast<int32_t>(raw);
  if (in.op == Opcode::LDI) {
    if (!next_word) throw Error(ErrorKind::UnknownOpcode, "truncated LDI at " + hex32(addr));
    in.ext_imm = *next_word;
  }
  return in;
}

MemoryMap::Region MemoryMap::region_of(uint32_t a) const {
  auto within = [a](uint32_t base, uint32_t size) { return a >= base && a - base < size; };
  if (within(flash_base, flash_size)) return Region::Flash;
  if (within(ram_base, ram_size)) return Region::Ram;
  if (within(periph_base, periph_size())) return Region::Periph;
  if (within(ctrl_base, ctrl_size)) return Region::Ctrl;
  return Region::None;
}

bool MemPermissions::allows(uint32_t addr, AccessKind kind) const {
  switch (map.region_of(addr)) {
    case MemoryMap::Region::Flash:
      return kind != AccessKind::Write;
    case MemoryMap::Region::Ram:
    case MemoryMap::Region::Periph:
    case MemoryMap::Region::Ctrl:
      return kind != AccessKind::Execute;
    case MemoryMap::Region::None:
      return false;
  }
  return false;
}

void check_access(uint32_t addr, AccessKind kind, const MemPermissions& perms, uint32_t pc,
                  uint64_t path_id) {
  if ((addr & 3u) != 0 || !perms.allows(addr, kind)) {
    throw MemoryFault(MemoryFaultInfo{pc, addr, kind, path_id});
  }
}

std::optional<uint32_t> FirmwareImage::flash_word(uint32_t addr) const {
  if (!map.in_flash(addr) || (addr & 3u)) return std::nullopt;
  uint32_t idx = (addr - map.flash_base) / 4;
  if (idx >= words.size()) return std::nullopt;
  return words[idx];
}

void FirmwareImage::validate() const {
  if (words.size() < kVectorSlots) {
    throw Error(ErrorKind::InvalidImage, "image shorter than the vector table");
  }
  if (words.size() * 4 > map.flash_size) {
    throw Error(ErrorKind::InvalidImage, "image larger than flash");
  }
  uint32_t sp = initial_sp();
  if (sp <= map.ram_base || sp > map.ram_end() || (sp & 3u)) {
    throw Error(ErrorKind::InvalidImage, "initial sp " + hex32(sp) + " not inside RAM");
  }
  auto in_image = [this](uint32_t a) { return flash_word(a).has_value(); };
  if (!in_image(entry())) throw Error(ErrorKind::InvalidImage, "reset vector " + hex32(entry()));
  for (int line = 0; line < kNumLines; ++line) {
    uint32_t v = vector(line);
    if (v != 0 && !in_image(v)) {
      throw Error(ErrorKind::InvalidImage, "vector " + std::to_string(line) + " -> " + hex32(v));
    }
  }
}

std::vector<uint8_t> FirmwareImage::to_bytes() const {
  std::vector<uint8_t> out;
  out.reserve(words.size() * 4);
  for (uint32_t w : words) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(w >> (8 * i)));
  }
  return out;
}

FirmwareImage FirmwareImage::from_bytes(std::span<const uint8_t> bytes, MemoryMap map) {
  if (bytes.size() % 4) throw Error(ErrorKind::InvalidImage, "image size not a multiple of 4");
  FirmwareImage img;
  img.map = map;
  img.words.resize(bytes.size() / 4);
  for (size_t i = 0; i < img.words.size(); ++i) {
    img.words[i] = uint32_t{bytes[4 * i]} | (uint32_t{bytes[4 * i + 1]} << 8) |
                   (uint32_t{bytes[4 * i + 2]} << 16) | (uint32_t{bytes[4 * i + 3]} << 24);
  }
  return img;
}

FirmwareImage FirmwareImage::load(const std::string& path, MemoryMap map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidImage, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes, map);
}

void FirmwareImage::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidImage, "cannot write " + path);
  auto bytes = to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace irqsym
