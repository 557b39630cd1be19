#pragma once

// Command-line front end shared by the irqsym tool and in-process callers.

#include <iosfwd>
#include <optional>
#include <string>

#include "irqsym/assembler.hpp"
#include "irqsym/isa.hpp"
#include "irqsym/mmio.hpp"

namespace irqsym {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitFault = 2;

struct LoadedInput {
  std::string name;
  FirmwareImage image;
  PeripheralLayout layout;
};

/// `fixture:NAME`, an assembly file (.s/.asm), or a raw image. Throws Error.
LoadedInput load_input(const std::string& input);

/// Runs one command line (argv[0] is the program name). Exit codes: 0 ok,
/// 1 unusable input or config, 2 a MemoryFault was found.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace irqsym
