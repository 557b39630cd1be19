#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "irqsym/assembler.hpp"
#include "irqsym/cfg.hpp"
#include "irqsym/cli.hpp"
#include "irqsym/driver.hpp"
#include "irqsym/error.hpp"
#include "irqsym/fixtures.hpp"
#include "irqsym/machine.hpp"

namespace py = pybind11;
using namespace irqsym;

namespace {

AnalysisConfig make_config(const std::string& mode, uint64_t steps, uint64_t isr_window, size_t max_seq_len,
                           bool deterministic, bool force_fixed) {
  AnalysisConfig c;
  parse_mode(mode, c);
  c.max_steps = steps;
  c.isr_window = isr_window;
  c.max_seq_len = max_seq_len;
  c.deterministic = deterministic;
  c.force_fixed = force_fixed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MVM-32 firmware analysis with interrupt modeling";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("fixture_names", &fixture_names);
  m.def("fixture_source", [](const std::string& name) { return fixture(name).source; });

  m.def(
      "assemble",
      [](const std::string& source) {
        AsmUnit u = assemble_unit(source);
        py::dict d;
        d["words"] = u.image.words;
        d["symbols"] = u.symbols;
        const std::vector<uint8_t> bytes = u.image.to_bytes();
        d["bytes"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        return d;
      },
      py::arg("source"));

  m.def(
      "run",
      [](const std::string& input, uint64_t steps, std::vector<uint32_t> dr) {
        LoadedInput in = load_input(input);
        ConcreteInputs ci;
        ci.layout = in.layout;
        ci.dr_values = std::move(dr);
        py::dict d;
        try {
          ConcreteRun r = run_steps(in.image, MachineState::boot(in.image, in.layout), ci, steps);
          d["halted"] = r.halted;
          d["steps"] = r.final_state.steps;
          d["pc"] = r.final_state.pc;
          d["blocks"] = r.blocks;
          d["fault"] = py::none();
        } catch (const MemoryFault& e) {
          d["halted"] = false;
          d["fault"] = py::dict(py::arg("pc") = e.info().pc, py::arg("addr") = e.info().addr,
                                py::arg("kind") = std::string(to_string(e.info().kind)));
        }
        return d;
      },
      py::arg("input"), py::arg("steps") = 1'000'000, py::arg("dr") = std::vector<uint32_t>{});

  m.def(
      "analyze_json",
      [](const std::string& input, const std::string& mode, uint64_t steps, uint64_t isr_window, size_t max_seq_len,
         bool deterministic, bool force_fixed) {
        LoadedInput in = load_input(input);
        AnalysisConfig c = make_config(mode, steps, isr_window, max_seq_len, deterministic, force_fixed);
        AnalysisReport r;
        {
          py::gil_scoped_release release;
          r = run_analysis(in.image, in.layout, c, in.name);
        }
        return py::make_tuple(r.to_json().dump(), r.trend_csv(), r.table.to_json().dump());
      },
      py::arg("input"), py::arg("mode") = "aim", py::arg("steps") = 2'000'000, py::arg("isr_window") = 30,
      py::arg("max_seq_len") = 64, py::arg("deterministic") = true, py::arg("force_fixed") = false);

  m.def(
      "cfg_dot", [](const std::string& input) { return build_cfg(load_input(input).image).to_dot(); },
      py::arg("input"));

  m.def(
      "compare",
      [](const std::string& input, const std::vector<std::string>& modes, uint64_t steps) {
        LoadedInput in = load_input(input);
        std::vector<AnalysisConfig> cs;
        for (const auto& mode : modes) cs.push_back(make_config(mode, steps, 30, 64, true, false));
        py::list out;
        for (const auto& r : compare_modes(in.image, in.layout, cs)) {
          out.append(py::dict(py::arg("mode") = r.mode, py::arg("covered") = r.covered,
                              py::arg("percent") = r.percent, py::arg("delta") = r.delta_vs_no_int));
        }
        return out;
      },
      py::arg("input"), py::arg("modes"), py::arg("steps") = 2'000'000);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"irqsym"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
