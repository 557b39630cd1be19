#include "irqsym/jit.hpp"

#include <algorithm>

#include "irqsym/error.hpp"
#include "irqsym/solver.hpp"

namespace irqsym {

FiringSite& SiteRegistry::visit(uint32_t pc, uint32_t var_addr) {
  FiringSite& s = sites_[pc];
  s.pc = pc;
  s.var_addr = var_addr;
  ++s.occurrence;
  return s;
}

std::string global_var_name(uint32_t addr) { return "g@" + hex32(addr); }

namespace {

Expr resolved(const SymState& s, const Expr& e) {
  if (!e.has_vars() || s.bindings.empty()) return e;
  return substitute(e, s.bindings);
}

Expr global_var(uint32_t addr) { return Expr::var(global_var_name(addr), Origin::GLOBAL, addr); }

/// `path`'s constraints with the global replaced by `value`, plus the parent
/// path-condition entries they share variables with.
std::vector<Expr> target_query(const LocalPath& path, uint32_t addr, const Expr& value, const SymState& parent) {
  const std::map<std::string, Expr> sub{{global_var_name(addr), value}};
  std::vector<Expr> q;
  for (const auto& c : path.constraints) q.push_back(substitute(c, sub));
  if (q.empty()) return q;
  Expr seed = q[0];
  for (size_t i = 1; i < q.size(); ++i) seed = Expr::raw(ExprOp::And, {seed, q[i]});
  for (const auto& c : relevant_constraints(parent.path_condition, seed)) q.push_back(c);
  return q;
}

}  // namespace

std::optional<FiringSite> detect_site(const SymState& state, const FirmwareImage& image,
                                      const InterruptModelTable& table, SiteRegistry& registry) {
  if (state.in_isr || state.halted) return std::nullopt;
  auto word = image.flash_word(state.pc);
  if (!word) return std::nullopt;
  const Instr in = decode(*word, image.flash_word(state.pc + 4), state.pc);
  if (in.op != Opcode::LD) return std::nullopt;
  const Expr a = resolved(state, add(state.regs[in.rs1], Expr::constant(static_cast<uint32_t>(in.imm))));
  if (!a.is_const() || !table.has(a.value())) return std::nullopt;
  return registry.visit(state.pc, a.value());
}

std::vector<LocalPath> local_explore(const FirmwareImage& image, const FiringSite& site, const SymState& state,
                                     const std::set<uint32_t>& coverage, const JitConfig& config) {
  SymState s = state;
  s.mem[site.var_addr] = global_var(site.var_addr);
  s.blocks.clear();
  s.skip_site_pc.reset();
  s.trace.clear();
  const size_t base = s.path_condition.size();
  const std::string g = global_var_name(site.var_addr);

  uint64_t next_id = 1;
  ExecContext ctx;
  ctx.image = &image;
  ctx.scope = Scope::LOCAL;
  ctx.solver_budget = config.solver_budget;
  ctx.next_id = &next_id;
  ctx.leaders = config.leaders;
  PathSet ps = explore(ctx, std::move(s), {StopWhen::Kind::BbBudget, config.isr_window, config.max_local_steps},
                       config.path_cap);

  std::vector<LocalPath> out;
  auto add_path = [&](const SymState& p, StopReason why) {
    LocalPath lp;
    lp.end = why;
    for (size_t i = base; i < p.path_condition.size(); ++i) {
      if (mentions(p.path_condition[i], g)) lp.constraints.push_back(p.path_condition[i]);
    }
    for (uint32_t b : p.blocks) {
      if (!coverage.count(b)) lp.new_blocks.insert(b);
    }
    out.push_back(std::move(lp));
  };
  for (const auto& p : ps.live) add_path(p, StopReason::BbBudget);
  for (const auto& t : ps.terminated) add_path(t.state, t.reason);
  return out;
}

std::vector<LocalPath> prune(std::vector<LocalPath> paths) {
  std::stable_sort(paths.begin(), paths.end(),
                   [](const LocalPath& a, const LocalPath& b) { return a.new_blocks.size() > b.new_blocks.size(); });
  std::vector<LocalPath> kept;
  for (auto& p : paths) {
    const bool covered = std::any_of(kept.begin(), kept.end(), [&p](const LocalPath& k) {
      return std::includes(k.new_blocks.begin(), k.new_blocks.end(), p.new_blocks.begin(), p.new_blocks.end());
    });
    if (!covered) kept.push_back(std::move(p));
  }
  return kept;
}

namespace {

struct Application {
  std::map<uint32_t, Expr> env;  // global -> value after the firings so far
  std::vector<std::vector<std::pair<size_t, Expr>>> dr_slots;  // per firing: payload index, fresh var
};

/// One more firing of `rec`: every effect applied simultaneously to `app`.
void apply_once(const ISRPathRecord& rec, uint32_t base_ordinal, const SymState& state, Application& app) {
  const size_t k = app.dr_slots.size();
  auto value_of = [&](uint32_t addr) {
    auto it = app.env.find(addr);
    return it != app.env.end() ? it->second : resolved(state, state.mem_value(addr));
  };
  std::map<std::string, Expr> sub;
  std::vector<std::pair<size_t, Expr>> slots;
  for (const auto& e : rec.effects) {
    for (const auto& [name, info] : free_vars(e.formula)) {
      if (sub.count(name)) continue;
      if (name.rfind("old@", 0) == 0) {
        sub[name] = value_of(info.tag);
      } else if (info.origin == Origin::SR) {
        sub[name] = Expr::constant(rec.sr_value);
      } else if (info.origin == Origin::DR) {
        Expr fresh = Expr::var(name + "~" + std::to_string(k), Origin::DR, info.tag);
        sub[name] = fresh;
        const uint32_t ordinal = static_cast<uint32_t>(std::stoul(name.substr(3)));
        slots.emplace_back(ordinal - base_ordinal, fresh);
      }
    }
  }
  std::map<uint32_t, Expr> next = app.env;
  for (const auto& e : rec.effects) next[e.var_addr] = substitute(e.formula, sub);
  app.env = std::move(next);
  app.dr_slots.push_back(std::move(slots));
}

}  // namespace

InterruptSequence infer_sequence(const LocalPath& path, const FiringSite& site, const InterruptModelTable& table,
                                 const SymState& state, const JitConfig& config) {
  const uint32_t addr = site.var_addr;
  const Expr current = resolved(state, state.mem_value(addr));
  if (is_sat(target_query(path, addr, current, state), config.solver_budget)) return {};

  std::string tried;
  for (const ISRPathRecord* rec : table.lookup(addr)) {
    if (!state.nvic.line_enabled(rec->line)) continue;
    const Effect* eff = rec->effect_on(addr);
    const LineModel* lm = table.line(rec->line);
    const uint32_t base_ordinal = lm ? lm->base.dr_counter : 0;
    const bool once = eff->pattern == Pattern::CONST_ASSIGN || eff->pattern == Pattern::DATA_RECEPTION;
    const size_t limit = once ? 1 : config.max_seq_len;
    Application app;
    for (size_t k = 1; k <= limit; ++k) {
      apply_once(*rec, base_ordinal, state, app);
      SolveResult r = solve(target_query(path, addr, app.env.at(addr), state), config.solver_budget);
      if (!r.sat) continue;
      InterruptSequence seq;
      seq.pattern = eff->pattern;
      for (const auto& slots : app.dr_slots) {
        Firing f{rec->line, rec->sr_value, rec->dr_witness};
        for (const auto& [i, var] : slots) {
          auto it = r.model.find(var.name());
          if (it == r.model.end()) continue;
          if (f.dr.size() <= i) f.dr.resize(i + 1, 0);
          f.dr[i] = it->second;
        }
        seq.firings.push_back(std::move(f));
      }
      return seq;
    }
    tried += " line " + std::to_string(rec->line) + "/" + hex32(rec->sr_value);
  }
  throw Error(ErrorKind::InferenceFailed, "global " + hex32(addr) + " at " + hex32(site.pc) +
                                              (tried.empty() ? ": no enabled record" : ": tried" + tried));
}

FireResult fire_sequence(const FirmwareImage& image, const InterruptSequence& seq, const FiringSite& site,
                         const LocalPath& path, const SymState& state, const JitConfig& config) {
  FireResult r;
  r.state = state;
  SymState& s = r.state;
  uint64_t next_id = 1;
  ExecContext ctx;
  ctx.image = &image;
  ctx.scope = Scope::GLOBAL_DSE;
  ctx.solver_budget = config.solver_budget;
  ctx.next_id = &next_id;
  ctx.leaders = config.leaders;
  const uint64_t start = s.steps;
  for (const auto& f : seq.firings) {
    s.nvic.fire(f.line, f.sr, f.dr);
    s.schedule.push_back({s.steps, f.line, f.sr, f.dr, false});
    bool returned = false;
    for (uint64_t i = 0; i < config.max_isr_steps && !returned && !s.halted; ++i) {
      StepOutcome o = step_symbolic(ctx, s);
      if (o.block_entry) r.blocks.insert(*o.block_entry);
      r.lines.insert(r.lines.end(), o.lines.begin(), o.lines.end());
      r.cr_bits.insert(r.cr_bits.end(), o.cr_bits.begin(), o.cr_bits.end());
      returned = o.isr_returned;
    }
    if (!returned) throw Error(ErrorKind::PostFireMismatch, "fired line " + std::to_string(f.line) + " did not return");
  }
  r.steps = s.steps - start;
  const Expr now = resolved(s, s.mem_value(site.var_addr));
  if (!is_sat(target_query(path, site.var_addr, now, s), config.solver_budget)) {
    throw Error(ErrorKind::PostFireMismatch, "global " + hex32(site.var_addr) + " = " + to_prefix(now) +
                                                 " misses the target path at " + hex32(site.pc));
  }
  s.skip_site_pc = site.pc;
  return r;
}

}  // namespace irqsym
