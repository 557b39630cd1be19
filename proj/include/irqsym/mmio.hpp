#pragma once

// Category-based peripheral register model. Each register is a control
// (CR), status (SR), data (DR) or mixed control/status (CSR) register; the
// category decides what a read returns in each analysis scope.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "irqsym/expr.hpp"
#include "irqsym/isa.hpp"
#include "irqsym/nvic.hpp"

namespace irqsym {

enum class RegCat : uint8_t { Unknown, CR, SR, DR, CSR };

const char* to_string(RegCat c);
std::optional<RegCat> regcat_from_string(const std::string& s);

struct RegisterCategory {
  RegCat cat = RegCat::Unknown;
  uint32_t cr_mask = 0;  // CSR only
  uint32_t sr_mask = 0;  // CSR only
  friend bool operator==(const RegisterCategory&, const RegisterCategory&) = default;
};

struct Access {
  enum class Kind : uint8_t { Read, Write, BitTest, Store };
  Kind kind;
  uint32_t value = 0;  // written value or tested mask
  friend bool operator==(const Access&, const Access&) = default;
};

/// Order-independent digest of an access log; enough to classify.
struct AccessSummary {
  bool read = false;
  bool written = false;
  bool stored = false;
  uint32_t written_bits = 0;
  uint32_t tested_bits = 0;

  void add(const Access& a);
  friend bool operator==(const AccessSummary&, const AccessSummary&) = default;
};

RegisterCategory classify(const AccessSummary& s);

/// Pure function of the access log. Rules, first match wins:
///   CR  : written and read back, never stored onward, tested bits all written
///   SR  : read and bit-tested, never written
///   DR  : read and stored/moved onward, never bit-tested
///   CSR : written and bit-tested on bits outside the written set
RegisterCategory classify(const std::vector<Access>& log);

enum class Scope : uint8_t { BOOT, ISR_ANALYSIS, LOCAL, GLOBAL_DSE };

const char* to_string(Scope s);

struct CrBitEnabled {
  uint32_t block;
  uint32_t offset;
  int bit;
  friend bool operator==(const CrBitEnabled&, const CrBitEnabled&) = default;
};

struct Recategorization {
  uint32_t addr;
  RegisterCategory from;
  RegisterCategory to;
  friend bool operator==(const Recategorization&, const Recategorization&) = default;
};

/// Declared categories, one line per register: `block offset category
/// [cr_mask sr_mask]`, `#` comments.
struct PeripheralLayout {
  struct Entry {
    uint32_t block;
    uint32_t offset;
    RegisterCategory category;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries;

  static PeripheralLayout parse(const std::string& text);
  static PeripheralLayout load(const std::string& path);
  std::string to_text() const;
  friend bool operator==(const PeripheralLayout&, const PeripheralLayout&) = default;
};

/// Everything a read needs besides the register itself.
struct ReadContext {
  Scope scope = Scope::GLOBAL_DSE;
  ActiveIsr* active = nullptr;     // staged values of the running ISR
  uint32_t* dr_counter = nullptr;  // ordinal of non-staged DR reads
  /// Concrete execution: every read yields a constant. DR reads consume
  /// `dr_inputs` in order, then read 0.
  bool concrete = false;
  const std::vector<uint32_t>* dr_inputs = nullptr;
};

struct ReadResult {
  Expr value;
  /// Set for PROBE variables, which are bound to a concrete value.
  std::optional<std::pair<std::string, uint32_t>> binding;
};

class PeripheralMap {
 public:
  explicit PeripheralMap(MemoryMap map = {}) : map_(map) {}

  void declare(uint32_t addr, RegisterCategory cat);
  void apply_layout(const PeripheralLayout& layout);

  RegisterCategory category(uint32_t addr) const;
  bool declared(uint32_t addr) const;
  uint32_t stored_value(uint32_t addr) const;
  const std::vector<Access>& access_log(uint32_t addr) const;
  const std::vector<Recategorization>& recategorizations() const { return recats_; }

  ReadResult read(uint32_t addr, ReadContext& ctx);
  /// Updates the stored value; reports CR bits that went 0 -> 1.
  std::vector<CrBitEnabled> write(uint32_t addr, uint32_t value);

  void observe_bit_test(uint32_t addr, uint32_t mask);
  void observe_store(uint32_t addr);

  /// Stored values of every CR-like register in `block`, used as a
  /// configuration fingerprint.
  std::map<uint32_t, uint32_t> block_config(uint32_t block) const;

  const MemoryMap& memory_map() const { return map_; }

  friend bool operator==(const PeripheralMap&, const PeripheralMap&) = default;

 private:
  struct Reg {
    RegisterCategory category;
    bool declared = false;
    bool ever_written = false;
    uint32_t stored = 0;
    uint32_t version = 0;
    std::vector<Access> log;  // capped; the summary covers the rest
    AccessSummary summary;
    friend bool operator==(const Reg&, const Reg&) = default;
  };

  Reg& reg(uint32_t addr) { return regs_[addr]; }
  void log_access(uint32_t addr, Access a);
  void reclassify(uint32_t addr);
  Expr sr_part(uint32_t addr, const ReadContext& ctx) const;
  Expr dr_value(uint32_t addr, ReadContext& ctx) const;

  MemoryMap map_;
  std::map<uint32_t, Reg> regs_;
  std::vector<Recategorization> recats_;
};

std::string sr_var_name(uint32_t addr);
std::string dr_var_name(uint32_t ordinal, uint32_t addr);

/// Peripheral register address encoded in an MMIO-derived variable (SR, DR
/// or probe); nullopt for other variables.
std::optional<uint32_t> mmio_var_addr(const std::string& name);

}  // namespace irqsym
