#include "irqsym/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <deque>
#include <iomanip>
#include <sstream>

#include "irqsym/error.hpp"
#include "irqsym/solver.hpp"

namespace irqsym {

void parse_mode(const std::string& text, AnalysisConfig& config) {
  if (text == "aim") {
    config.mode = Mode::AIM;
  } else if (text == "no_int") {
    config.mode = Mode::NO_INT;
  } else if (text == "fixed") {
    config.mode = Mode::FIXED;
  } else if (text.rfind("fixed:", 0) == 0) {
    const std::string n = text.substr(6);
    if (n.empty() || n.find_first_not_of("0123456789") != std::string::npos || std::stoull(n) == 0) {
      throw Error(ErrorKind::InvalidConfig, "bad fixed period '" + n + "'");
    }
    config.mode = Mode::FIXED;
    config.fixed_period = std::stoull(n);
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown mode '" + text + "' (aim, no_int, fixed[:n])");
  }
}

std::string mode_name(const AnalysisConfig& config) {
  switch (config.mode) {
    case Mode::AIM: return "aim";
    case Mode::NO_INT: return "no_int";
    case Mode::FIXED: return "fixed:" + std::to_string(config.fixed_period);
  }
  return "?";
}

bool Coverage::add(uint64_t path, uint32_t block, uint64_t step, double seconds) {
  per_path[path].insert(block);
  if (!covered_blocks.insert(block).second) return false;
  first_hit_step[block] = step;
  first_hit_time[block] = seconds;
  return true;
}

size_t prioritize(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidConfig, "prioritize: no candidates");
  auto key = [](const Candidate& c) {
    return std::make_tuple(c.distance.value_or(UINT32_MAX), c.steps, c.order);
  };
  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (key(candidates[i]) < key(candidates[best])) best = i;
  }
  return best;
}

std::optional<ScheduledFiring> baseline_tick(SymState& s, const FirmwareImage& image, const AnalysisConfig& config,
                                             const std::map<int, uint32_t>& known_sr) {
  if (config.mode != Mode::FIXED || s.in_isr || s.blocks_since_fire < config.fixed_period) return std::nullopt;
  std::vector<int> lines;
  for (int l = 0; l < kNumLines; ++l) {
    const bool vectored = image.vector(l) != 0;
    if (s.nvic.line_enabled(l) || (config.force_fixed && vectored)) lines.push_back(l);
  }
  if (lines.empty()) return std::nullopt;
  s.blocks_since_fire = 0;
  auto it = std::lower_bound(lines.begin(), lines.end(), s.fixed_rr);
  const int line = it == lines.end() ? lines.front() : *it;
  s.fixed_rr = line + 1;
  auto sr = known_sr.find(line);
  ScheduledFiring f{s.steps, line, sr == known_sr.end() ? 0u : sr->second, {}, !s.nvic.line_enabled(line)};
  s.nvic.fire(f.line, f.sr, f.dr, f.force);
  s.schedule.push_back(f);
  return f;
}

bool replay_fault(const FirmwareImage& image, const PeripheralLayout& layout, const FaultRecord& fault) {
  ConcreteInputs in;
  in.dr_values = fault.dr_inputs;
  in.schedule = fault.schedule;
  in.layout = layout;
  try {
    run_steps(image, MachineState::boot(image, layout), in, fault.steps + 1);
  } catch (const MemoryFault& e) {
    return e.info().pc == fault.info.pc && e.info().addr == fault.info.addr && e.info().kind == fault.info.kind;
  } catch (const Error&) {
    return false;
  }
  return false;
}

double AnalysisReport::percent() const {
  return total_blocks == 0 ? 0.0 : 100.0 * static_cast<double>(covered()) / static_cast<double>(total_blocks);
}

std::vector<const SequenceRecord*> AnalysisReport::sequences_at(uint32_t site_pc) const {
  std::vector<const SequenceRecord*> out;
  for (const auto& s : sequences)
    if (s.site_pc == site_pc) out.push_back(&s);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

nlohmann::json firing_json(const ScheduledFiring& f) {
  nlohmann::json dr = nlohmann::json::array();
  for (uint32_t v : f.dr) dr.push_back(hex32(v));
  return {{"at_step", f.at_step}, {"line", f.line}, {"sr", hex32(f.sr)}, {"dr", dr}, {"force", f.force}};
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

nlohmann::json AnalysisReport::to_json(bool with_timestamp) const {
  using nlohmann::json;
  json j;
  j["schema"] = kReportSchema;
  if (with_timestamp) j["timestamp"] = iso_now();
  j["name"] = name;
  j["mode"] = mode_name(config);
  j["config"] = {{"steps", config.max_steps},
                 {"isr_window", config.isr_window},
                 {"max_seq_len", config.max_seq_len},
                 {"path_cap", config.path_cap},
                 {"solver_budget", config.solver_budget},
                 {"deterministic", config.deterministic},
                 {"force_fixed", config.force_fixed}};
  json blocks = json::array();
  for (uint32_t b : coverage.covered_blocks) blocks.push_back(hex32(b));
  j["coverage"] = {{"total_blocks", total_blocks},
                   {"covered", covered()},
                   {"percent", std::round(percent() * 100.0) / 100.0},
                   {"blocks", blocks}};
  json trend_j = json::array();
  for (const auto& [step, cov] : trend) trend_j.push_back({step, cov});
  j["trend"] = trend_j;
  j["sites"] = sites.size();

  json seqs = json::array();
  size_t lo = 0, hi = 0, total = 0;
  for (const auto& s : sequences) {
    const size_t n = s.firings.size();
    lo = seqs.empty() ? n : std::min(lo, n);
    hi = std::max(hi, n);
    total += n;
    json f = json::array();
    for (const auto& x : s.firings) {
      json dr = json::array();
      for (uint32_t v : x.dr) dr.push_back(hex32(v));
      f.push_back({{"line", x.line}, {"sr", hex32(x.sr)}, {"dr", dr}});
    }
    seqs.push_back({{"site", hex32(s.site_pc)},
                    {"var_addr", hex32(s.var_addr)},
                    {"length", n},
                    {"pattern", s.pattern ? to_string(*s.pattern) : "none"},
                    {"step", s.step},
                    {"firings", f}});
  }
  const double avg = sequences.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(sequences.size());
  j["sequences"] = {{"count", sequences.size()},
                    {"len", {{"min", lo}, {"max", hi}, {"avg", std::round(avg * 1000.0) / 1000.0}}},
                    {"items", seqs}};

  std::set<int> imt_lines;
  for (const auto& v : imt)
    for (const auto& r : v["records"]) imt_lines.insert(r["line"].get<int>());
  j["imt"] = {{"variables", imt.size()}, {"records", imt_records}, {"lines", imt_lines}, {"table", imt}};

  json faults_j = json::array();
  for (const auto& f : faults) {
    json dr = json::array();
    for (uint32_t v : f.dr_inputs) dr.push_back(hex32(v));
    json sched = json::array();
    for (const auto& s : f.schedule) sched.push_back(firing_json(s));
    faults_j.push_back({{"pc", hex32(f.info.pc)},
                        {"addr", hex32(f.info.addr)},
                        {"kind", std::string(to_string(f.info.kind))},
                        {"path", f.info.path_id},
                        {"steps", f.steps},
                        {"replayed", f.replayed},
                        {"dr_inputs", dr},
                        {"schedule", sched}});
  }
  j["faults"] = faults_j;
  json errors_j = json::array();
  for (const auto& e : errors) {
    errors_j.push_back(
        {{"path", e.path}, {"pc", hex32(e.pc)}, {"kind", std::string(to_string(e.kind))}, {"detail", e.detail}});
  }
  j["errors"] = errors_j;
  j["stats"] = {{"steps", stats.steps},
                {"paths", stats.paths},
                {"terminated", stats.terminated},
                {"halted", stats.halted},
                {"evicted", stats.evicted},
                {"site_visits", stats.site_visits},
                {"site_analyses", stats.site_analyses},
                {"local_paths", stats.local_paths},
                {"pruned_paths", stats.pruned_paths},
                {"already_satisfied", stats.already_satisfied},
                {"inference_failures", stats.inference_failures},
                {"post_fire_mismatches", stats.post_fire_mismatches},
                {"baseline_firings", stats.baseline_firings},
                {"forced_disabled_firings", stats.forced_disabled_firings},
                {"isr_analyses", stats.isr_analyses}};
  j["phase_counts"] = phase_counts;
  // Wall-clock times would break byte-identical deterministic reports.
  if (!config.deterministic) j["phase_times"] = phase_times;
  return j;
}

std::string AnalysisReport::trend_csv() const {
  std::ostringstream os;
  os << "step,covered\n";
  for (const auto& [step, cov] : trend) os << step << ',' << cov << '\n';
  return os.str();
}

namespace {

struct Live {
  SymState s;
  uint64_t order = 0;
};

class Driver {
 public:
  Driver(const FirmwareImage& image, const PeripheralLayout& layout, const AnalysisConfig& config)
      : image_(image),
        layout_(layout),
        config_(config),
        cfg_(build_cfg(image)),
        leaders_(cfg_.block_starts()),
        region_(find_region()),
        ident_(image, region_, ident_config()) {
    jit_.isr_window = config.isr_window;
    jit_.max_seq_len = config.max_seq_len;
    jit_.solver_budget = config.solver_budget;
    jit_.leaders = &leaders_;
    ctx_.image = &image_;
    ctx_.scope = Scope::GLOBAL_DSE;
    ctx_.solver_budget = config.solver_budget;
    ctx_.next_id = &next_id_;
    ctx_.leaders = &leaders_;
    if (config.mode == Mode::AIM) {
      ctx_.is_site = [this](uint32_t addr) { return ident_.table().has(addr); };
    }
    report_.config = config;
    report_.total_blocks = leaders_.size();
  }

  AnalysisReport run(const std::string& name) {
    report_.name = name;
    start_ = Clock::now();
    SymState root = SymState::boot(image_, layout_);
    root.id = next_id_++;
    push(std::move(root));
    record_trend(true);

    while (!live_.empty() && report_.stats.steps < config_.max_steps && !out_of_time()) {
      const size_t i = choose();
      Live p = std::move(live_[i]);
      live_.erase(live_.begin() + static_cast<long>(i));
      run_quantum(p);
    }
    report_.stats.steps = std::min(report_.stats.steps, config_.max_steps);
    record_trend(true);
    finish();
    return std::move(report_);
  }

 private:
  IdentConfig ident_config() const {
    IdentConfig ic;
    ic.solver_budget = config_.solver_budget;
    ic.leaders = &leaders_;
    return ic;
  }

  GlobalRegion find_region() {
    try {
      return locate_global_region(image_, layout_);
    } catch (const Error& e) {
      report_.log.push_back(std::string(e.what()) + "; using all RAM below the stack reserve");
      return fallback_region(image_);
    }
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool out_of_time() const {
    return !config_.deterministic && config_.time_budget_s > 0 && elapsed() > config_.time_budget_s;
  }

  void add_time(const std::string& phase, Clock::time_point since) {
    report_.phase_times[phase] += std::chrono::duration<double>(Clock::now() - since).count();
  }

  void cover(uint64_t path, uint32_t block) {
    if (!leaders_.count(block)) return;
    if (report_.coverage.add(path, block, report_.stats.steps, elapsed())) {
      coverage_dirty_ = true;
      record_trend(false);
    }
  }

  void record_trend(bool force) {
    const std::pair<uint64_t, uint64_t> row{report_.stats.steps, report_.covered()};
    if (!report_.trend.empty() && report_.trend.back().first == row.first) {
      report_.trend.back() = row;
    } else if (force || report_.trend.empty() || report_.trend.back().second != row.second) {
      report_.trend.push_back(row);
    }
  }

  void push(SymState s) {
    ++report_.stats.paths;
    live_.push_back({std::move(s), order_++});
    if (live_.size() > config_.path_cap) evict();
  }

  std::optional<uint32_t> distance(const SymState& s) {
    if (coverage_dirty_) {
      distances_ = distances_to_uncovered(cfg_, report_.coverage.covered_blocks);
      coverage_dirty_ = false;
    }
    auto b = cfg_.block_of(s.pc);
    if (!b) return std::nullopt;
    auto it = distances_.find(*b);
    if (it == distances_.end()) return std::nullopt;
    return it->second;
  }

  size_t choose() {
    std::vector<Candidate> cs;
    cs.reserve(live_.size());
    for (const auto& p : live_) cs.push_back({distance(p.s), p.s.steps, p.order});
    return prioritize(cs);
  }

  /// Drops the path farthest from uncovered code; ties go to the path
  /// that prioritize() would pick last.
  void evict() {
    size_t worst = 0;
    auto key = [this](const Live& p) {
      return std::make_tuple(distance(p.s).value_or(UINT32_MAX), p.s.steps, p.order);
    };
    for (size_t i = 1; i < live_.size(); ++i) {
      if (key(live_[i]) > key(live_[worst])) worst = i;
    }
    live_.erase(live_.begin() + static_cast<long>(worst));
    ++report_.stats.evicted;
  }

  /// Lowest event flag an effectful record stages; with forced firing,
  /// every flag the ISR tests, enabled or not.
  std::map<int, uint32_t> known_sr() const {
    std::map<int, uint32_t> out;
    for (const auto& [line, lm] : ident_.table().lines()) {
      uint32_t bits = 0;
      for (const auto& r : lm.analysis.records) bits |= r.sr_value;
      if (config_.force_fixed) bits = lm.analysis.sr_bits;
      if (bits) out[line] = config_.force_fixed ? bits : bits & (~bits + 1);
    }
    return out;
  }

  void triggers(const std::vector<LineEnabled>& lines, const std::vector<CrBitEnabled>& cr_bits, const SymState& s) {
    if (config_.mode == Mode::NO_INT) return;
    std::deque<TriggerEvent> fifo;
    for (const auto& e : lines) fifo.emplace_back(e);
    for (const auto& e : cr_bits) fifo.emplace_back(e);
    const auto t0 = Clock::now();
    const size_t before = ident_.analyses();
    while (!fifo.empty()) {
      ident_.on_trigger(fifo.front(), s);
      fifo.pop_front();
    }
    report_.stats.isr_analyses += ident_.analyses() - before;
    add_time("identification", t0);
    if (config_.mode == Mode::AIM) {
      for (uint32_t b : ident_.analyzed_blocks()) cover(0, b);
    }
  }

  void terminate(Live& p) {
    ++report_.stats.terminated;
    if (p.s.halted) ++report_.stats.halted;
  }

  void fault(Live& p, const MemoryFault& e) {
    FaultRecord f;
    f.info = e.info();
    f.info.path_id = p.s.id;
    f.schedule = p.s.schedule;
    f.steps = p.s.steps;
    Model model = p.s.witness;
    try {
      SolveResult r = solve(p.s.path_condition, config_.solver_budget);
      if (r.sat) model = r.model;
    } catch (const Error&) {
    }
    for (const auto& [name, value] : model) {
      if (name.rfind("dr#", 0) != 0) continue;
      const size_t k = std::stoul(name.substr(3));
      if (f.dr_inputs.size() <= k) f.dr_inputs.resize(k + 1, 0);
      f.dr_inputs[k] = value;
    }
    f.replayed = replay_fault(image_, layout_, f);
    report_.faults.push_back(std::move(f));
  }

  void run_quantum(Live& p) {
    SymState& s = p.s;
    const auto t0 = Clock::now();
    for (uint64_t q = 0; q < config_.quantum; ++q) {
      if (report_.stats.steps >= config_.max_steps) break;
      if (config_.mode == Mode::FIXED && !s.in_isr && s.blocks_since_fire >= config_.fixed_period) {
        if (auto f = baseline_tick(s, image_, config_, known_sr())) {
          ++report_.stats.baseline_firings;
          if (f->force) ++report_.stats.forced_disabled_firings;
        }
      }
      const uint64_t before = s.steps;
      StepOutcome o;
      try {
        o = step_symbolic(ctx_, s);
      } catch (const MemoryFault& e) {
        report_.stats.steps += s.steps - before;
        fault(p, e);
        terminate(p);
        add_time("symbolic", t0);
        return;
      } catch (const Error& e) {
        report_.stats.steps += s.steps - before;
        report_.errors.push_back({s.id, s.pc, e.kind(), e.what()});
        terminate(p);
        add_time("symbolic", t0);
        return;
      }
      report_.stats.steps += s.steps - before;
      if (o.block_entry) {
        cover(s.id, *o.block_entry);
        if (!s.in_isr) ++s.blocks_since_fire;
      }
      for (auto& f : o.forks) {
        report_.coverage.per_path[f.id] = report_.coverage.per_path[s.id];
      }
      triggers(o.lines, o.cr_bits, s);
      if (o.site_addr) {
        add_time("symbolic", t0);
        site(p, *o.site_addr);
        for (auto& f : o.forks) push(std::move(f));
        live_.push_back(std::move(p));
        return;
      }
      if (s.halted) {
        terminate(p);
        for (auto& f : o.forks) push(std::move(f));
        add_time("symbolic", t0);
        return;
      }
      if (!o.forks.empty()) {
        for (auto& f : o.forks) push(std::move(f));
        break;
      }
    }
    add_time("symbolic", t0);
    live_.push_back(std::move(p));
  }

  void site(Live& p, uint32_t var_addr) {
    SymState& s = p.s;
    ++report_.stats.site_visits;
    report_.sites.insert(s.pc);
    FiringSite site = registry_.visit(s.pc, var_addr);
    s.skip_site_pc = s.pc;
    // Re-analyze only when the table or the coverage changed since the
    // last analysis of this site.
    const auto key = std::make_tuple(ident_.table().epoch(), report_.covered());
    auto [it, fresh] = analyzed_sites_.try_emplace(s.pc, key);
    if (!fresh) {
      if (it->second == key) return;
      it->second = key;
    }
    ++report_.stats.site_analyses;
    const auto t0 = Clock::now();
    std::vector<LocalPath> kept;
    try {
      auto paths = local_explore(image_, site, s, report_.coverage.covered_blocks, jit_);
      report_.stats.local_paths += paths.size();
      kept = prune(std::move(paths));
    } catch (const Error& e) {
      report_.log.push_back("local exploration at " + hex32(s.pc) + ": " + e.what());
    }
    report_.stats.pruned_paths += kept.size();
    for (const auto& lp : kept) {
      if (lp.new_blocks.empty()) continue;
      InterruptSequence seq;
      try {
        seq = infer_sequence(lp, site, ident_.table(), s, jit_);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InferenceFailed && e.kind() != ErrorKind::NoModelForVariable &&
            e.kind() != ErrorKind::SolverBudgetExhausted) {
          throw;
        }
        ++report_.stats.inference_failures;
        report_.log.push_back(e.what());
        continue;
      }
      if (seq.firings.empty()) {
        ++report_.stats.already_satisfied;
        continue;
      }
      try {
        FireResult fr = fire_sequence(image_, seq, site, lp, s, jit_);
        fr.state.id = next_id_++;
        report_.coverage.per_path[fr.state.id] = report_.coverage.per_path[s.id];
        report_.stats.steps += fr.steps;
        for (uint32_t b : fr.blocks) cover(fr.state.id, b);
        report_.sequences.push_back({site.pc, site.var_addr, seq.firings, seq.pattern, report_.stats.steps});
        triggers(fr.lines, fr.cr_bits, fr.state);
        push(std::move(fr.state));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::PostFireMismatch) {
          ++report_.stats.post_fire_mismatches;
          report_.log.push_back(e.what());
          const auto t1 = Clock::now();
          for (const auto& f : seq.firings) ident_.reanalyze(f.line, s);
          add_time("identification", t1);
        } else if (e.kind() == ErrorKind::LineNotEnabled || e.kind() == ErrorKind::SolverBudgetExhausted) {
          report_.log.push_back(e.what());
        } else {
          throw;
        }
      }
    }
    add_time("firing", t0);
  }

  void finish() {
    report_.imt = ident_.table().to_json();
    report_.imt_records = ident_.table().record_count();
    report_.table = ident_.table();
    report_.region = region_;
    report_.phase_counts = {{"steps", report_.stats.steps},
                            {"isr_analyses", report_.stats.isr_analyses},
                            {"site_analyses", report_.stats.site_analyses},
                            {"sequences", report_.sequences.size()}};
    for (const auto& l : ident_.log()) report_.log.push_back(l);
  }

  const FirmwareImage& image_;
  PeripheralLayout layout_;
  AnalysisConfig config_;
  AnalysisReport report_;
  Cfg cfg_;
  std::set<uint32_t> leaders_;
  GlobalRegion region_;
  InterruptIdentifier ident_;
  JitConfig jit_;
  SiteRegistry registry_;
  ExecContext ctx_;
  uint64_t next_id_ = 1;
  uint64_t order_ = 0;
  std::vector<Live> live_;
  bool coverage_dirty_ = true;
  std::map<uint32_t, uint32_t> distances_;
  std::map<uint32_t, std::tuple<uint64_t, size_t>> analyzed_sites_;
  Clock::time_point start_;
};

}  // namespace

AnalysisReport run_analysis(const FirmwareImage& image, const PeripheralLayout& layout, const AnalysisConfig& config,
                            const std::string& name) {
  if (config.max_steps == 0) throw Error(ErrorKind::InvalidConfig, "step budget must be positive");
  if (config.path_cap == 0) throw Error(ErrorKind::InvalidConfig, "path cap must be positive");
  if (config.max_seq_len == 0) throw Error(ErrorKind::InvalidConfig, "max sequence length must be positive");
  Driver d(image, layout, config);
  return d.run(name);
}

std::vector<ModeResult> compare_modes(const FirmwareImage& image, const PeripheralLayout& layout,
                                      const std::vector<AnalysisConfig>& modes) {
  std::vector<ModeResult> out;
  for (const auto& m : modes) {
    AnalysisReport r = run_analysis(image, layout, m);
    out.push_back({mode_name(m), r.covered(), r.percent(), 0});
  }
  size_t base = 0;
  for (size_t i = 0; i < modes.size(); ++i)
    if (modes[i].mode == Mode::NO_INT) base = i;
  for (auto& r : out) r.delta_vs_no_int = static_cast<long>(r.covered) - static_cast<long>(out[base].covered);
  return out;
}

}  // namespace irqsym
