#include "irqsym/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "irqsym/driver.hpp"
#include "irqsym/error.hpp"
#include "irqsym/fixtures.hpp"
#include "irqsym/machine.hpp"

namespace irqsym {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidImage, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path);
  out << text;
}

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Applies `key = value` lines to options of `cmd` that the command line
/// left unset. Keys use either dashes or underscores.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, path + ":" + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (!opt || key == "config") {
      throw Error(ErrorKind::InvalidConfig, path + ":" + std::to_string(n) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error(ErrorKind::InvalidConfig, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

struct AnalyzeOptions {
  std::string input;
  std::string mode = "aim";
  uint64_t steps = 2'000'000;
  uint64_t isr_window = 30;
  size_t max_seq_len = 64;
  size_t path_cap = kDefaultPathCap;
  uint64_t solver_budget = kDefaultSolverBudget;
  double time_budget = 0;
  bool deterministic = false;
  bool force_fixed = false;
  std::string out;
  std::string trend;
  std::string config;
};

void add_analysis_options(CLI::App* cmd, AnalyzeOptions& o, bool with_mode) {
  cmd->add_option("input", o.input, "fixture:NAME, assembly source or image")->required();
  if (with_mode) cmd->add_option("--mode", o.mode, "aim, no_int or fixed[:n]");
  cmd->add_option("--steps", o.steps, "shared step budget")->check(CLI::PositiveNumber);
  cmd->add_option("--isr-window", o.isr_window, "blocks explored past a firing site")->check(CLI::PositiveNumber);
  cmd->add_option("--max-seq-len", o.max_seq_len, "longest inferred sequence")->check(CLI::PositiveNumber);
  cmd->add_option("--path-cap", o.path_cap, "live path cap")->check(CLI::PositiveNumber);
  cmd->add_option("--solver-budget", o.solver_budget, "solver decisions per query")->check(CLI::PositiveNumber);
  cmd->add_option("--time-budget", o.time_budget, "seconds; ignored with --deterministic")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--deterministic", o.deterministic, "step budget only, no wall-clock fields");
  cmd->add_flag("--force-fixed", o.force_fixed, "fixed mode also fires disabled lines and events");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--config", o.config, "key = value file; flags take precedence");
}

AnalysisConfig to_config(const AnalyzeOptions& o) {
  AnalysisConfig c;
  parse_mode(o.mode, c);
  c.max_steps = o.steps;
  c.isr_window = o.isr_window;
  c.max_seq_len = o.max_seq_len;
  c.path_cap = o.path_cap;
  c.solver_budget = o.solver_budget;
  c.time_budget_s = o.time_budget;
  c.deterministic = o.deterministic;
  c.force_fixed = o.force_fixed;
  return c;
}

std::vector<uint32_t> parse_words(const std::string& text) {
  std::vector<uint32_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v > 0xFFFFFFFFul) throw Error(ErrorKind::InvalidConfig, "bad word '" + item + "'");
    out.push_back(static_cast<uint32_t>(v));
  }
  return out;
}

/// STEP:LINE[:SR[:DR,DR...]]
ScheduledFiring parse_firing(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string p;
  while (std::getline(in, p, ':')) parts.push_back(p);
  if (parts.size() < 2 || parts.size() > 4) throw Error(ErrorKind::InvalidConfig, "bad firing '" + text + "'");
  ScheduledFiring f;
  auto one = [&](const std::string& s) {
    auto w = parse_words(s);
    if (w.size() != 1) throw Error(ErrorKind::InvalidConfig, "bad firing '" + text + "'");
    return w[0];
  };
  f.at_step = one(parts[0]);
  f.line = static_cast<int>(one(parts[1]));
  if (f.line >= kNumLines) throw Error(ErrorKind::InvalidConfig, "line out of range in '" + text + "'");
  if (parts.size() > 2) f.sr = one(parts[2]);
  if (parts.size() > 3) f.dr = parse_words(parts[3]);
  return f;
}

}  // namespace

LoadedInput load_input(const std::string& input) {
  if (input.rfind("fixture:", 0) == 0) {
    Fixture f = fixture(input.substr(8));
    return {f.name, f.unit.image, f.unit.layout};
  }
  if (ends_with(input, ".s") || ends_with(input, ".asm")) {
    AsmUnit u = assemble_unit(read_file(input));
    return {input, u.image, u.layout};
  }
  read_file(input);  // clear error for a missing file
  return {input, FirmwareImage::load(input), {}};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Symbolic firmware analysis with interrupt modeling for MVM-32 images", "irqsym"};
  app.require_subcommand(1);

  std::string asm_src, asm_out;
  auto* asm_cmd = app.add_subcommand("asm", "assemble a source file into an image");
  asm_cmd->add_option("source", asm_src)->required();
  asm_cmd->add_option("-o,--out", asm_out, "image path; hex listing on stdout if absent");

  std::string run_input, run_dr;
  std::vector<std::string> run_fire;
  uint64_t run_steps_n = 1'000'000;
  auto* run_cmd = app.add_subcommand("run", "concrete execution");
  run_cmd->add_option("input", run_input)->required();
  run_cmd->add_option("--steps", run_steps_n)->check(CLI::PositiveNumber);
  run_cmd->add_option("--dr", run_dr, "DR read values in order, comma separated");
  run_cmd->add_option("--fire", run_fire, "STEP:LINE[:SR[:DR,...]] firing, repeatable");

  AnalyzeOptions an;
  auto* an_cmd = app.add_subcommand("analyze", "symbolic analysis with an interrupt strategy");
  add_analysis_options(an_cmd, an, true);
  an_cmd->add_option("--trend", an.trend, "coverage trend CSV path");

  AnalyzeOptions im;
  auto* imt_cmd = app.add_subcommand("imt", "interrupt model table");
  imt_cmd->require_subcommand(1);
  auto* imt_dump = imt_cmd->add_subcommand("dump", "analyze, then dump the model table as JSON");
  add_analysis_options(imt_dump, im, false);

  std::string cfg_input, cfg_out;
  auto* cfg_cmd = app.add_subcommand("cfg", "control-flow graph");
  cfg_cmd->require_subcommand(1);
  auto* cfg_dump = cfg_cmd->add_subcommand("dump", "DOT graph");
  cfg_dump->add_option("input", cfg_input)->required();
  cfg_dump->add_option("--out", cfg_out);

  AnalyzeOptions cmp;
  std::string cmp_modes = "no_int,fixed,aim";
  auto* cmp_cmd = app.add_subcommand("compare", "coverage of several modes under one budget");
  add_analysis_options(cmp_cmd, cmp, false);
  cmp_cmd->add_option("--modes", cmp_modes, "comma separated modes, at least two");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*asm_cmd) {
      AsmUnit u = assemble_unit(read_file(asm_src));
      if (asm_out.empty()) {
        for (size_t i = 0; i < u.image.words.size(); ++i) {
          out << hex32(u.image.map.flash_base + static_cast<uint32_t>(4 * i)) << ": " << std::hex << std::setw(8)
              << std::setfill('0') << u.image.words[i] << std::dec << std::setfill(' ') << '\n';
        }
      } else {
        u.image.save(asm_out);
        out << u.image.words.size() << " words written to " << asm_out << '\n';
      }
      return kExitOk;
    }

    if (*run_cmd) {
      LoadedInput in = load_input(run_input);
      ConcreteInputs ci;
      ci.layout = in.layout;
      ci.dr_values = parse_words(run_dr);
      for (const auto& f : run_fire) ci.schedule.push_back(parse_firing(f));
      std::stable_sort(ci.schedule.begin(), ci.schedule.end(),
                       [](const auto& a, const auto& b) { return a.at_step < b.at_step; });
      try {
        ConcreteRun r = run_steps(in.image, MachineState::boot(in.image, in.layout), ci, run_steps_n);
        out << (r.halted ? "halted" : "stopped") << " after " << r.final_state.steps << " steps, "
            << r.blocks.size() << " block entries, pc " << hex32(r.final_state.pc) << '\n';
        return kExitOk;
      } catch (const MemoryFault& e) {
        out << "MemoryFault " << to_string(e.info().kind) << " at pc " << hex32(e.info().pc) << " addr "
            << hex32(e.info().addr) << '\n';
        return kExitFault;
      }
    }

    if (*an_cmd) {
      if (!an.config.empty()) apply_config_file(*an_cmd, an.config);
      LoadedInput in = load_input(an.input);
      AnalysisReport r = run_analysis(in.image, in.layout, to_config(an), in.name);
      emit(an.out, r.to_json().dump(2) + "\n", out);
      if (!an.trend.empty()) write_file(an.trend, r.trend_csv());
      err << r.name << ": " << r.covered() << "/" << r.total_blocks << " blocks, " << r.sequences.size()
          << " sequences, " << r.faults.size() << " faults\n";
      return r.faults.empty() ? kExitOk : kExitFault;
    }

    if (*imt_dump) {
      if (!im.config.empty()) apply_config_file(*imt_dump, im.config);
      LoadedInput in = load_input(im.input);
      AnalysisReport r = run_analysis(in.image, in.layout, to_config(im), in.name);
      emit(im.out, r.table.to_json().dump(2) + "\n", out);
      return kExitOk;
    }

    if (*cfg_dump) {
      LoadedInput in = load_input(cfg_input);
      emit(cfg_out, build_cfg(in.image).to_dot(), out);
      return kExitOk;
    }

    if (*cmp_cmd) {
      if (!cmp.config.empty()) apply_config_file(*cmp_cmd, cmp.config);
      LoadedInput in = load_input(cmp.input);
      std::vector<AnalysisConfig> modes;
      std::istringstream ms(cmp_modes);
      std::string m;
      while (std::getline(ms, m, ',')) {
        AnalyzeOptions o = cmp;
        o.mode = trim(m);
        modes.push_back(to_config(o));
      }
      if (modes.size() < 2) throw Error(ErrorKind::InvalidConfig, "compare needs at least two modes");
      auto rows = compare_modes(in.image, in.layout, modes);
      std::ostringstream csv;
      csv << "mode,covered,percent,delta\n";
      out << std::left << std::setw(14) << "mode" << std::right << std::setw(9) << "covered" << std::setw(9)
          << "percent" << std::setw(8) << "delta" << '\n';
      for (const auto& row : rows) {
        out << std::left << std::setw(14) << row.mode << std::right << std::setw(9) << row.covered << std::setw(9)
            << std::fixed << std::setprecision(2) << row.percent << std::setw(8) << std::showpos
            << row.delta_vs_no_int << std::noshowpos << '\n';
        csv << row.mode << ',' << row.covered << ',' << std::fixed << std::setprecision(2) << row.percent << ','
            << row.delta_vs_no_int << '\n';
      }
      if (!cmp.out.empty()) write_file(cmp.out, csv.str());
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "irqsym: " << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitBadInput;
}

}  // namespace irqsym
