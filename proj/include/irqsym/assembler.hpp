#pragma once

// Two-pass assembler for MVM-32 source.
//
//   label:                     ; comment
//   .sp 0x20010000             initial stack pointer (vector slot 0)
//   .reset main                reset handler (vector slot 1)
//   .vector 3, uart_isr        ISR for interrupt line 3 (slot 5)
//   .org 0x100                 move the location counter
//   .word 1, label             literal words
//   .equ UART, 0x40000300      named constant
//   .periph 3, 0x0, SR         declared register category (CSR takes masks)
//   LDI r1, UART+4             LD r2, [r1, 4]      ST r2, [r1]
//   ADD r1, r2, r3             MOV r1, r2, -1      BNE r1, r0, loop
//   JAL r14, f / CALL f        J loop              JALR r0, r14, 0 / RET
//
// Operand expressions are sums and differences of numbers, labels and
// .equ names. Registers r0-r15, with lr = r14 and sp = r15.

#include <map>
#include <string>

#include "irqsym/isa.hpp"
#include "irqsym/mmio.hpp"

namespace irqsym {

inline constexpr uint32_t kDefaultCodeOrigin = kVectorSlots * 4;
inline constexpr uint32_t kDefaultInitialSp = 0x2001'0000;

struct AsmUnit {
  FirmwareImage image;
  PeripheralLayout layout;
  std::map<std::string, uint32_t> symbols;  // labels and .equ values

  uint32_t symbol(const std::string& name) const;
};

/// Throws UndefinedLabel, DuplicateLabel, RangeError or SyntaxError, each
/// naming the source line.
AsmUnit assemble_unit(const std::string& source, MemoryMap map = {});

inline FirmwareImage assemble(const std::string& source) { return assemble_unit(source).image; }

}  // namespace irqsym
