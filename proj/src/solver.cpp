#include "irqsym/solver.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cctype>
#include <string_view>
#include <sstream>
#include <unordered_map>

#include "irqsym/error.hpp"
#include "sat.hpp"

namespace irqsym {

namespace {

std::atomic<uint64_t> g_steps{0};
std::atomic<uint64_t> g_queries{0};

using Word = std::array<int, 32>;  // literal per bit, bit 0 first

struct PairHash {
  size_t operator()(const std::pair<int, int>& p) const {
    return std::hash<int64_t>{}((int64_t{p.first} << 32) ^ static_cast<uint32_t>(p.second));
  }
};

class BitBlaster {
 public:
  explicit BitBlaster(sat::Solver& s) : s_(s) {
    t_ = s_.new_var();
    s_.add_clause({t_});
  }

  int T() const { return t_; }
  int F() const { return -t_; }

  Word blast(const Expr& e) {
    if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second;
    Word w{};
    switch (e.op()) {
      case ExprOp::Const:
        for (int i = 0; i < 32; ++i) w[i] = (e.value() >> i) & 1u ? T() : F();
        break;
      case ExprOp::Var: {
        auto [it, inserted] = vars_.try_emplace(e.name());
        if (inserted) {
          for (int i = 0; i < 32; ++i) it->second[i] = s_.new_var();
        }
        w = it->second;
        break;
      }
      case ExprOp::Ite: {
        int c = nonzero(blast(e.kids()[0]));
        Word a = blast(e.kids()[1]);
        Word b = blast(e.kids()[2]);
        for (int i = 0; i < 32; ++i) w[i] = mux(c, a[i], b[i]);
        break;
      }
      default: {
        Word a = blast(e.kids()[0]);
        Word b = blast(e.kids()[1]);
        w = binop(e.op(), a, b);
      }
    }
    memo_.emplace(e.node(), w);
    return w;
  }

  void assert_true(const Expr& e) { s_.add_clause({nonzero(blast(e))}); }

  const std::unordered_map<std::string, Word>& vars() const { return vars_; }

 private:
  int fresh() { return s_.new_var(); }

  int gand(int a, int b) {
    if (a == F() || b == F() || a == -b) return F();
    if (a == T()) return b;
    if (b == T() || a == b) return a;
    if (a > b) std::swap(a, b);
    if (auto it = and_cache_.find({a, b}); it != and_cache_.end()) return it->second;
    int g = fresh();
    s_.add_clause({-g, a});
    s_.add_clause({-g, b});
    s_.add_clause({g, -a, -b});
    and_cache_.emplace(std::make_pair(a, b), g);
    return g;
  }
  int gor(int a, int b) { return -gand(-a, -b); }
  int gxor(int a, int b) {
    if (a == F()) return b;
    if (b == F()) return a;
    if (a == T()) return -b;
    if (b == T()) return -a;
    if (a == b) return F();
    if (a == -b) return T();
    bool neg = false;
    if (a < 0) { a = -a; neg = !neg; }
    if (b < 0) { b = -b; neg = !neg; }
    if (a > b) std::swap(a, b);
    int g;
    if (auto it = xor_cache_.find({a, b}); it != xor_cache_.end()) {
      g = it->second;
    } else {
      g = fresh();
      s_.add_clause({-g, a, b});
      s_.add_clause({-g, -a, -b});
      s_.add_clause({g, -a, b});
      s_.add_clause({g, a, -b});
      xor_cache_.emplace(std::make_pair(a, b), g);
    }
    return neg ? -g : g;
  }
  int mux(int c, int a, int b) {
    if (c == T() || a == b) return a;
    if (c == F()) return b;
    return gor(gand(c, a), gand(-c, b));
  }
  int nonzero(const Word& w) {
    int acc = F();
    for (int l : w) acc = gor(acc, l);
    return acc;
  }
  Word bool_word(int l) {
    Word w;
    w.fill(F());
    w[0] = l;
    return w;
  }
  // a + b + cin, returns (sum, carry out)
  std::pair<Word, int> adder(const Word& a, const Word& b, int cin) {
    Word s{};
    int c = cin;
    for (int i = 0; i < 32; ++i) {
      int axb = gxor(a[i], b[i]);
      s[i] = gxor(axb, c);
      c = gor(gand(a[i], b[i]), gand(c, axb));
    }
    return {s, c};
  }
  Word negate_bits(const Word& a) {
    Word r;
    for (int i = 0; i < 32; ++i) r[i] = -a[i];
    return r;
  }
  Word shift(const Word& a, const Word& b, bool left) {
    // barrel shifter over the low five bits of the amount (amount mod 32)
    Word cur = a;
    for (int stage = 0; stage < 5; ++stage) {
      const int k = 1 << stage;
      Word next;
      for (int i = 0; i < 32; ++i) {
        int src = left ? i - k : i + k;
        int shifted = (src >= 0 && src < 32) ? cur[src] : F();
        next[i] = mux(b[stage], shifted, cur[i]);
      }
      cur = next;
    }
    return cur;
  }
  int ult_lit(const Word& a, const Word& b) {
    // a - b borrows iff a < b; a + ~b + 1 carries iff a >= b
    auto [s, carry] = adder(a, negate_bits(b), T());
    (void)s;
    return -carry;
  }
  Word binop(ExprOp op, const Word& a, const Word& b) {
    Word w{};
    switch (op) {
      case ExprOp::Add:
        return adder(a, b, F()).first;
      case ExprOp::Sub:
        return adder(a, negate_bits(b), T()).first;
      case ExprOp::And:
        for (int i = 0; i < 32; ++i) w[i] = gand(a[i], b[i]);
        return w;
      case ExprOp::Or:
        for (int i = 0; i < 32; ++i) w[i] = gor(a[i], b[i]);
        return w;
      case ExprOp::Xor:
        for (int i = 0; i < 32; ++i) w[i] = gxor(a[i], b[i]);
        return w;
      case ExprOp::Shl:
        return shift(a, b, true);
      case ExprOp::Shr:
        return shift(a, b, false);
      case ExprOp::Eq:
      case ExprOp::Ne: {
        int diff = F();
        for (int i = 0; i < 32; ++i) diff = gor(diff, gxor(a[i], b[i]));
        return bool_word(op == ExprOp::Eq ? -diff : diff);
      }
      case ExprOp::Ult:
        return bool_word(ult_lit(a, b));
      case ExprOp::Slt: {
        Word a2 = a, b2 = b;
        a2[31] = -a[31];
        b2[31] = -b[31];
        return bool_word(ult_lit(a2, b2));
      }
      default:
        return w;
    }
  }

  sat::Solver& s_;
  int t_ = 0;
  std::unordered_map<const ExprNode*, Word> memo_;
  std::unordered_map<std::string, Word> vars_;
  std::unordered_map<std::pair<int, int>, int, PairHash> and_cache_;
  std::unordered_map<std::pair<int, int>, int, PairHash> xor_cache_;
};

struct Prepared {
  bool trivially_unsat = false;
  std::vector<Expr> residual;
  Model bound;  // variables fixed by equality propagation
};

// Folds constants and propagates (var == const) facts to a fixpoint.
Prepared prepare(const std::vector<Expr>& constraints) {
  Prepared p;
  std::vector<Expr> work;
  work.reserve(constraints.size());
  for (const auto& c : constraints) work.push_back(simplify(c));
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Expr> next;
    Model learned;
    for (const auto& c : work) {
      if (c.is_const()) {
        if (c.value() == 0) {
          p.trivially_unsat = true;
          return p;
        }
        continue;
      }
      if (c.op() == ExprOp::Eq && c.kids()[0].is_var() && c.kids()[1].is_const()) {
        const auto& name = c.kids()[0].name();
        auto it = learned.find(name);
        if (it == learned.end()) {
          learned.emplace(name, c.kids()[1].value());
          changed = true;
          continue;
        }
        if (it->second != c.kids()[1].value()) {
          p.trivially_unsat = true;
          return p;
        }
        continue;
      }
      next.push_back(c);
    }
    if (changed) {
      for (auto& c : next) c = substitute(c, learned);
      p.bound.insert(learned.begin(), learned.end());
    }
    work = std::move(next);
  }
  p.residual = std::move(work);
  return p;
}

void fill_missing(const std::vector<Expr>& constraints, Model& m) {
  for (const auto& c : constraints) {
    for (const auto& [name, info] : free_vars(c)) m.try_emplace(name, 0u);
  }
}

}  // namespace

SolveResult solve(const std::vector<Expr>& constraints, uint64_t budget) {
  ++g_queries;
  SolveResult out;
  Prepared p = prepare(constraints);
  if (p.trivially_unsat) return out;
  out.model = p.bound;
  if (!p.residual.empty()) {
    sat::Solver s;
    BitBlaster bb(s);
    for (const auto& c : p.residual) bb.assert_true(c);
    sat::Result r = s.solve(budget);
    g_steps += s.steps();
    if (r == sat::Result::Budget) {
      throw Error(ErrorKind::SolverBudgetExhausted, "limit " + std::to_string(budget));
    }
    if (r == sat::Result::Unsat) return out;
    for (const auto& [name, word] : bb.vars()) {
      uint32_t v = 0;
      for (int i = 0; i < 32; ++i) {
        int l = word[i];
        bool bit = l > 0 ? s.value(l) : !s.value(-l);
        if (bit) v |= 1u << i;
      }
      out.model[name] = v;
    }
  }
  fill_missing(constraints, out.model);
  out.sat = true;
  return out;
}

bool is_sat(const std::vector<Expr>& constraints, uint64_t budget) {
  return solve(constraints, budget).sat;
}

std::optional<Model> solve_minimal(const std::vector<Expr>& constraints, const std::string& var,
                                   uint64_t budget) {
  SolveResult base = solve(constraints, budget);
  if (!base.sat) return std::nullopt;
  auto it = base.model.find(var);
  if (it == base.model.end() || it->second == 0) return base.model;

  Expr v = Expr::var(var, Origin::SR);
  for (const auto& c : constraints) {
    auto fv = free_vars(c);
    if (auto f = fv.find(var); f != fv.end()) {
      v = Expr::var(var, f->second.origin, f->second.tag);
      break;
    }
  }
  Expr pop = Expr::constant(0);
  for (uint32_t i = 0; i < 32; ++i) pop = add(pop, band(shr(v, Expr::constant(i)), Expr::constant(1)));

  std::vector<Expr> cs = constraints;
  const int upper = std::popcount(it->second);
  Model best = base.model;
  int count = upper;
  for (int p = 0; p < upper; ++p) {
    cs.push_back(ult(pop, Expr::constant(static_cast<uint32_t>(p + 1))));
    SolveResult r = solve(cs, budget);
    cs.pop_back();
    if (r.sat) {
      best = r.model;
      count = p;
      break;
    }
  }
  cs.push_back(ult(pop, Expr::constant(static_cast<uint32_t>(count + 1))));
  // clear bits from the top whenever the constraints allow it
  for (int bit = 31; bit >= 0; --bit) {
    uint32_t mask = 1u << bit;
    if ((best[var] & mask) == 0) {
      cs.push_back(eq(band(v, Expr::constant(mask)), Expr::constant(0)));
      continue;
    }
    cs.push_back(eq(band(v, Expr::constant(mask)), Expr::constant(0)));
    SolveResult r = solve(cs, budget);
    if (r.sat) {
      best = r.model;
    } else {
      cs.back() = ne(band(v, Expr::constant(mask)), Expr::constant(0));
    }
  }
  return best;
}

std::vector<uint32_t> enumerate_values(const std::vector<Expr>& constraints, const Expr& e,
                                       size_t limit, uint64_t budget) {
  std::vector<uint32_t> out;
  std::vector<Expr> cs = constraints;
  while (out.size() < limit) {
    SolveResult r = solve(cs, budget);
    if (!r.sat) break;
    uint32_t v = eval(e, r.model);
    out.push_back(v);
    cs.push_back(ne(e, Expr::constant(v)));
  }
  return out;
}

namespace {

std::string smt_symbol(const std::string& name) {
  for (char c : name) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || std::string_view("~!@$%^&*_-+=<>.?/").find(c) != std::string_view::npos;
    if (!ok) return "|" + name + "|";
  }
  return name;
}

void smt_rec(const Expr& e, std::ostringstream& os) {
  auto hexc = [&os](uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#x%08x", v);
    os << buf;
  };
  auto as_bv = [&os](const std::string& pred) { os << "(ite " << pred << " #x00000001 #x00000000)"; };
  switch (e.op()) {
    case ExprOp::Const: hexc(e.value()); return;
    case ExprOp::Var: os << smt_symbol(e.name()); return;
    case ExprOp::Ite: {
      std::ostringstream c;
      smt_rec(e.kids()[0], c);
      os << "(ite (distinct " << c.str() << " #x00000000) ";
      smt_rec(e.kids()[1], os);
      os << ' ';
      smt_rec(e.kids()[2], os);
      os << ')';
      return;
    }
    default: break;
  }
  const char* fn = nullptr;
  bool predicate = false;
  switch (e.op()) {
    case ExprOp::Add: fn = "bvadd"; break;
    case ExprOp::Sub: fn = "bvsub"; break;
    case ExprOp::And: fn = "bvand"; break;
    case ExprOp::Or: fn = "bvor"; break;
    case ExprOp::Xor: fn = "bvxor"; break;
    case ExprOp::Shl: fn = "bvshl"; break;
    case ExprOp::Shr: fn = "bvlshr"; break;
    case ExprOp::Eq: fn = "="; predicate = true; break;
    case ExprOp::Ne: fn = "distinct"; predicate = true; break;
    case ExprOp::Ult: fn = "bvult"; predicate = true; break;
    case ExprOp::Slt: fn = "bvslt"; predicate = true; break;
    default: break;
  }
  std::ostringstream inner;
  inner << '(' << fn << ' ';
  smt_rec(e.kids()[0], inner);
  inner << ' ';
  if (e.op() == ExprOp::Shl || e.op() == ExprOp::Shr) {
    // shift amounts are taken mod 32
    inner << "(bvand ";
    smt_rec(e.kids()[1], inner);
    inner << " #x0000001f)";
  } else {
    smt_rec(e.kids()[1], inner);
  }
  inner << ')';
  if (predicate) {
    as_bv(inner.str());
  } else {
    os << inner.str();
  }
}

}  // namespace

std::string emit_smtlib(const std::vector<Expr>& constraints) {
  std::map<std::string, VarInfo> vars;
  for (const auto& c : constraints) collect_vars(c, vars);
  std::ostringstream os;
  os << "(set-logic QF_BV)\n";
  for (const auto& [name, info] : vars) os << "(declare-const " << smt_symbol(name) << " (_ BitVec 32))\n";
  for (const auto& c : constraints) {
    // top-level comparisons are asserted directly; anything else as nonzero
    if (c.op() == ExprOp::Ne && c.kids()[1].is_const() && c.kids()[1].value() == 0) {
      std::ostringstream lhs;
      smt_rec(c.kids()[0], lhs);
      os << "(assert (distinct " << lhs.str() << " #x00000000))\n";
      continue;
    }
    std::ostringstream body;
    smt_rec(c, body);
    os << "(assert (distinct " << body.str() << " #x00000000))\n";
  }
  os << "(check-sat)\n";
  return os.str();
}

uint64_t solver_steps_total() { return g_steps.load(); }
uint64_t solver_queries_total() { return g_queries.load(); }

}  // namespace irqsym
