#pragma once

// MVM-32: a small word-addressed MCU instruction set with an ARM-style
// memory map (flash / RAM / peripherals / interrupt controller) and a vector
// table at the flash base.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irqsym/error.hpp"

namespace irqsym {

enum class Opcode : uint8_t {
  NOP = 0x00,
  LDI = 0x01,
  LD = 0x02,
  ST = 0x03,
  ADD = 0x04,
  SUB = 0x05,
  AND = 0x06,
  OR = 0x07,
  XOR = 0x08,
  SHL = 0x09,
  SHR = 0x0A,
  MOV = 0x0B,
  BEQ = 0x10,
  BNE = 0x11,
  BLT = 0x12,
  BGE = 0x13,
  JAL = 0x14,
  JALR = 0x15,
  IRET = 0x16,
  HALT = 0x17,
};

inline constexpr int kNumRegs = 16;
inline constexpr int kLinkReg = 14;
inline constexpr int kStackReg = 15;
inline constexpr int kNumLines = 32;
inline constexpr uint32_t kVectorSlots = 2 + kNumLines;

std::optional<Opcode> opcode_from_byte(uint8_t b);
const char* mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(const std::string& name);

bool is_branch(Opcode op);
bool is_alu(Opcode op);
/// Instructions that end a basic block.
bool ends_block(Opcode op);

struct Instr {
  Opcode op = Opcode::NOP;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;  // sign-extended 12-bit
  std::optional<uint32_t> ext_imm;  // LDI only

  uint32_t size_bytes() const { return op == Opcode::LDI ? 8 : 4; }
  friend bool operator==(const Instr&, const Instr&) = default;
};

std::string to_string(const Instr& in);

/// Encodes to one or two words (two for LDI). Throws RangeError for fields
/// that do not fit.
std::vector<uint32_t> encode(const Instr& in);

/// Decodes the word at `addr`. LDI consumes `next_word`, which must then be
/// present.
Instr decode(uint32_t word, std::optional<uint32_t> next_word, uint32_t addr = 0);

struct MemoryMap {
  uint32_t flash_base = 0x0000'0000;
  uint32_t flash_size = 256 * 1024;
  uint32_t ram_base = 0x2000'0000;
  uint32_t ram_size = 64 * 1024;
  uint32_t periph_base = 0x4000'0000;
  uint32_t periph_blocks = 32;
  uint32_t periph_block_size = 0x100;
  uint32_t ctrl_base = 0xE000'E000;
  uint32_t ctrl_size = 0x400;

  enum class Region { None, Flash, Ram, Periph, Ctrl };

  uint32_t periph_size() const { return periph_blocks * periph_block_size; }
  Region region_of(uint32_t addr) const;
  bool in_flash(uint32_t a) const { return region_of(a) == Region::Flash; }
  bool in_ram(uint32_t a) const { return region_of(a) == Region::Ram; }
  uint32_t ram_end() const { return ram_base + ram_size; }
  /// Peripheral block index for an address inside the peripheral region.
  uint32_t periph_block(uint32_t addr) const { return (addr - periph_base) / periph_block_size; }
};

/// Least-permission layout: flash r+x, RAM and MMIO r+w, nothing elsewhere.
struct MemPermissions {
  MemoryMap map;
  bool allows(uint32_t addr, AccessKind kind) const;
};

/// Throws MemoryFault on a permission violation or misaligned address.
void check_access(uint32_t addr, AccessKind kind, const MemPermissions& perms, uint32_t pc = 0,
                  uint64_t path_id = 0);

struct FirmwareImage {
  std::vector<uint32_t> words;  // flash contents from flash_base
  MemoryMap map;

  uint32_t initial_sp() const { return word_or_zero(0); }
  uint32_t entry() const { return word_or_zero(1); }
  uint32_t vector(int line) const { return word_or_zero(2 + static_cast<uint32_t>(line)); }
  uint32_t word_or_zero(uint32_t index) const { return index < words.size() ? words[index] : 0; }
  /// Flash word at a byte address; nullopt outside the loaded image.
  std::optional<uint32_t> flash_word(uint32_t addr) const;

  /// Checks the vector-table invariants; throws InvalidImage.
  void validate() const;

  std::vector<uint8_t> to_bytes() const;
  static FirmwareImage from_bytes(std::span<const uint8_t> bytes, MemoryMap map = {});
  static FirmwareImage load(const std::string& path, MemoryMap map = {});
  void save(const std::string& path) const;
};

}  // namespace irqsym
