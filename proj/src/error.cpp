#include "irqsym/error.hpp"

#include <cstdio>

namespace irqsym {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownOpcode: return "UnknownOpcode";
    case ErrorKind::MemoryFault: return "MemoryFault";
    case ErrorKind::StepBudgetExhausted: return "StepBudgetExhausted";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::SolverBudgetExhausted: return "SolverBudgetExhausted";
    case ErrorKind::SymbolicPC: return "SymbolicPC";
    case ErrorKind::PathBudgetExhausted: return "PathBudgetExhausted";
    case ErrorKind::Unsatisfiable: return "Unsatisfiable";
    case ErrorKind::SymbolicMMIOWrite: return "SymbolicMMIOWrite";
    case ErrorKind::UnmappedControllerOffset: return "UnmappedControllerOffset";
    case ErrorKind::LineNotEnabled: return "LineNotEnabled";
    case ErrorKind::RegionNotFound: return "RegionNotFound";
    case ErrorKind::UnassociatedPeripheral: return "UnassociatedPeripheral";
    case ErrorKind::UnsolvableSRPath: return "UnsolvableSRPath";
    case ErrorKind::NoModelForVariable: return "NoModelForVariable";
    case ErrorKind::InferenceFailed: return "InferenceFailed";
    case ErrorKind::PostFireMismatch: return "PostFireMismatch";
    case ErrorKind::UndefinedLabel: return "UndefinedLabel";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownFixture: return "UnknownFixture";
    case ErrorKind::InvalidImage: return "InvalidImage";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IretOutsideIsr: return "IretOutsideIsr";
  }
  return "Unknown";
}

std::string_view to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return "read";
    case AccessKind::Write: return "write";
    case AccessKind::Execute: return "execute";
  }
  return "?";
}

std::string hex32(uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

MemoryFault::MemoryFault(MemoryFaultInfo info)
    : Error(ErrorKind::MemoryFault, std::string(to_string(info.kind)) + " at " + hex32(info.addr) +
                                        " (pc " + hex32(info.pc) + ")"),
      info_(info) {}

}  // namespace irqsym
