#include "irqsym/fixtures.hpp"

#include <sstream>

#include "irqsym/error.hpp"

namespace irqsym {

// Generated at configure time from fixtures/*.s.
const std::map<std::string, std::string>& embedded_fixture_sources();

namespace {

uint32_t number(const std::string& s) { return static_cast<uint32_t>(std::stoul(s, nullptr, 0)); }

}  // namespace

GroundTruth parse_ground_truth(const std::string& source) {
  GroundTruth t;
  std::istringstream in(source);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.starts_with(";!")) continue;
    std::istringstream ls(line.substr(2));
    std::string key;
    ls >> key;
    std::vector<std::string> args;
    for (std::string a; ls >> a;) args.push_back(a);
    auto need = [&](size_t n) {
      if (args.size() < n) throw Error(ErrorKind::SyntaxError, "ground truth '" + key + "' needs " + std::to_string(n));
    };
    if (key == "line") {
      need(1);
      t.line = std::stoi(args[0]);
    } else if (key == "sr_bits") {
      need(2);
      auto& bits = t.sr_bits[std::stoi(args[0])];
      for (size_t i = 1; i < args.size(); ++i) bits.insert(std::stoi(args[i]));
    } else if (key == "switches") {
      t.switches = args;
    } else if (key == "pattern") {
      need(2);
      t.patterns[args[0]] = args[1];
    } else if (key == "sequence") {
      need(2);
      t.sequences[args[0]] = std::stoi(args[1]);
    } else if (key == "local_paths") {
      need(2);
      t.local_paths[args[0]] = std::stoi(args[1]);
    } else if (key == "dependent") {
      t.dependent.insert(t.dependent.end(), args.begin(), args.end());
    } else if (key == "region") {
      need(2);
      t.regions.emplace_back(number(args[0]), number(args[1]));
    } else if (key == "no_region") {
      t.no_region = true;
    } else if (key == "strict") {
      t.strict = true;
    } else if (key == "fault") {
      need(2);
      t.fault = std::make_pair(args[0], args[1]);
    } else if (key == "crash_line") {
      need(1);
      t.crash_line = std::stoi(args[0]);
    } else if (key == "stale") {
      t.stale.insert(t.stale.end(), args.begin(), args.end());
    } else if (key == "jalr_target") {
      need(2);
      t.jalr_target = std::make_pair(args[0], args[1]);
    } else {
      throw Error(ErrorKind::SyntaxError, "unknown ground truth key '" + key + "'");
    }
  }
  return t;
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& [name, src] : embedded_fixture_sources()) {
    (void)src;
    out.push_back(name);
  }
  return out;
}

std::vector<std::string> core_corpus() {
  return {"delay-boot",     "uart-isr",      "const-assign-flag", "data-reception-checksum",
          "interrupt-chain", "dup-effect-isr", "null-handler",      "oob-write"};
}

Fixture fixture(const std::string& name) {
  const auto& all = embedded_fixture_sources();
  auto it = all.find(name);
  if (it == all.end()) throw Error(ErrorKind::UnknownFixture, name);
  Fixture f;
  f.name = name;
  f.source = it->second;
  f.unit = assemble_unit(f.source);
  f.truth = parse_ground_truth(f.source);
  return f;
}

}  // namespace irqsym
