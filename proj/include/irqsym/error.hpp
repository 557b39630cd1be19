#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace irqsym {

enum class ErrorKind {
  UnknownOpcode,
  MemoryFault,
  StepBudgetExhausted,
  UnboundVariable,
  SolverBudgetExhausted,
  SymbolicPC,
  PathBudgetExhausted,
  Unsatisfiable,
  SymbolicMMIOWrite,
  UnmappedControllerOffset,
  LineNotEnabled,
  RegionNotFound,
  UnassociatedPeripheral,
  UnsolvableSRPath,
  NoModelForVariable,
  InferenceFailed,
  PostFireMismatch,
  UndefinedLabel,
  DuplicateLabel,
  RangeError,
  SyntaxError,
  UnknownFixture,
  InvalidImage,
  InvalidConfig,
  IretOutsideIsr,
};

std::string_view to_string(ErrorKind kind);

/// Engine-wide exception. The kind drives recovery decisions; the message
/// carries the human-readable detail (addresses, line numbers).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class AccessKind { Read, Write, Execute };

std::string_view to_string(AccessKind kind);

struct MemoryFaultInfo {
  uint32_t pc = 0;
  uint32_t addr = 0;
  AccessKind kind = AccessKind::Read;
  uint64_t path_id = 0;
};

class MemoryFault : public Error {
 public:
  explicit MemoryFault(MemoryFaultInfo info);
  const MemoryFaultInfo& info() const noexcept { return info_; }

 private:
  MemoryFaultInfo info_;
};

std::string hex32(uint32_t v);

}  // namespace irqsym
