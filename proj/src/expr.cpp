#include "irqsym/expr.hpp"

#include <cstdio>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "irqsym/error.hpp"

namespace irqsym {

const char* to_string(Origin o) {
  switch (o) {
    case Origin::SR: return "SR";
    case Origin::DR: return "DR";
    case Origin::GLOBAL: return "GLOBAL";
    case Origin::PROBE: return "PROBE";
  }
  return "?";
}

const char* to_string(ExprOp op) {
  switch (op) {
    case ExprOp::Const: return "const";
    case ExprOp::Var: return "var";
    case ExprOp::Add: return "add";
    case ExprOp::Sub: return "sub";
    case ExprOp::And: return "and";
    case ExprOp::Or: return "or";
    case ExprOp::Xor: return "xor";
    case ExprOp::Shl: return "shl";
    case ExprOp::Shr: return "shr";
    case ExprOp::Eq: return "eq";
    case ExprOp::Ne: return "ne";
    case ExprOp::Ult: return "ult";
    case ExprOp::Slt: return "slt";
    case ExprOp::Ite: return "ite";
  }
  return "?";
}

bool is_comparison(ExprOp op) {
  return op == ExprOp::Eq || op == ExprOp::Ne || op == ExprOp::Ult || op == ExprOp::Slt;
}

namespace {

size_t mix(size_t h, size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

std::shared_ptr<const ExprNode> const_node(uint32_t v) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Const;
  n->value = v;
  n->hash = mix(1, v);
  return n;
}

// Small constants are shared; most concrete code only touches these.
const std::shared_ptr<const ExprNode>& cached_const(uint32_t v) {
  static const std::vector<std::shared_ptr<const ExprNode>> cache = [] {
    std::vector<std::shared_ptr<const ExprNode>> c;
    for (uint32_t i = 0; i < 256; ++i) c.push_back(const_node(i));
    return c;
  }();
  return cache[v];
}

bool is_bool_valued(const Expr& e) {
  if (is_comparison(e.op())) return true;
  if (e.is_const()) return e.value() <= 1;
  if (e.op() == ExprOp::Ite) return is_bool_valued(e.kids()[1]) && is_bool_valued(e.kids()[2]);
  return false;
}

bool commutative(ExprOp op) {
  return op == ExprOp::Add || op == ExprOp::And || op == ExprOp::Or || op == ExprOp::Xor ||
         op == ExprOp::Eq || op == ExprOp::Ne;
}

}  // namespace

Expr::Expr() : node_(cached_const(0)) {}

Expr Expr::constant(uint32_t v) {
  if (v < 256) return Expr(cached_const(v));
  return Expr(const_node(v));
}

Expr Expr::var(const std::string& name, Origin origin, uint32_t tag) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Var;
  n->name = name;
  n->origin = origin;
  n->tag = tag;
  n->hash = mix(2, std::hash<std::string>{}(name));
  n->has_vars = true;
  return Expr(std::move(n));
}

Expr Expr::raw(ExprOp op, std::vector<Expr> kids) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  size_t h = mix(3, static_cast<size_t>(op));
  for (const auto& k : kids) {
    h = mix(h, k.hash());
    n->has_vars = n->has_vars || k.has_vars();
  }
  n->hash = h;
  n->kids = std::move(kids);
  return Expr(std::move(n));
}

ExprOp Expr::op() const { return node_->op; }
uint32_t Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
Origin Expr::origin() const { return node_->origin; }
uint32_t Expr::tag() const { return node_->tag; }
const std::vector<Expr>& Expr::kids() const { return node_->kids; }
bool Expr::has_vars() const { return node_->has_vars; }
size_t Expr::hash() const { return node_->hash; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const ExprNode& x = *a.node_;
  const ExprNode& y = *b.node_;
  if (x.hash != y.hash || x.op != y.op) return false;
  if (x.op == ExprOp::Const) return x.value == y.value;
  if (x.op == ExprOp::Var) return x.name == y.name;
  if (x.kids.size() != y.kids.size()) return false;
  for (size_t i = 0; i < x.kids.size(); ++i) {
    if (x.kids[i] != y.kids[i]) return false;
  }
  return true;
}

uint32_t apply_op(ExprOp op, uint32_t a, uint32_t b) {
  switch (op) {
    case ExprOp::Add: return a + b;
    case ExprOp::Sub: return a - b;
    case ExprOp::And: return a & b;
    case ExprOp::Or: return a | b;
    case ExprOp::Xor: return a ^ b;
    case ExprOp::Shl: return a << (b & 31u);
    case ExprOp::Shr: return a >> (b & 31u);
    case ExprOp::Eq: return a == b ? 1u : 0u;
    case ExprOp::Ne: return a != b ? 1u : 0u;
    case ExprOp::Ult: return a < b ? 1u : 0u;
    case ExprOp::Slt: return static_cast<int32_t>(a) < static_cast<int32_t>(b) ? 1u : 0u;
    default: return 0;
  }
}

namespace {

Expr binary(ExprOp op, Expr a, Expr b) {
  if (a.is_const() && b.is_const()) return Expr::constant(apply_op(op, a.value(), b.value()));
  if (commutative(op) && a.is_const()) std::swap(a, b);
  const bool bc = b.is_const();
  const uint32_t bv = bc ? b.value() : 0;
  switch (op) {
    case ExprOp::Add:
      if (bc && bv == 0) return a;
      // (x + c1) + c2 -> x + (c1 + c2)
      if (bc && a.op() == ExprOp::Add && a.kids()[1].is_const()) {
        return binary(ExprOp::Add, a.kids()[0], Expr::constant(a.kids()[1].value() + bv));
      }
      break;
    case ExprOp::Sub:
      if (a == b) return Expr::constant(0);
      if (bc) return binary(ExprOp::Add, a, Expr::constant(0u - bv));
      break;
    case ExprOp::And:
      if (bc && bv == 0) return Expr::constant(0);
      if (bc && bv == 0xFFFFFFFFu) return a;
      if (a == b) return a;
      if (bc && bv == 1 && is_bool_valued(a)) return a;
      if (bc && a.op() == ExprOp::And && a.kids()[1].is_const()) {
        return binary(ExprOp::And, a.kids()[0], Expr::constant(a.kids()[1].value() & bv));
      }
      break;
    case ExprOp::Or:
      if (bc && bv == 0) return a;
      if (bc && bv == 0xFFFFFFFFu) return b;
      if (a == b) return a;
      break;
    case ExprOp::Xor:
      if (bc && bv == 0) return a;
      if (a == b) return Expr::constant(0);
      break;
    case ExprOp::Shl:
    case ExprOp::Shr:
      if (bc && (bv & 31u) == 0) return a;
      if (a.is_const() && a.value() == 0) return a;
      break;
    case ExprOp::Eq:
      if (a == b) return Expr::constant(1);
      if (bc && bv == 0 && is_comparison(a.op())) {
        // !(cmp) for the two comparisons that have a direct negation
        if (a.op() == ExprOp::Eq) return binary(ExprOp::Ne, a.kids()[0], a.kids()[1]);
        if (a.op() == ExprOp::Ne) return binary(ExprOp::Eq, a.kids()[0], a.kids()[1]);
      }
      if (bc && is_bool_valued(a) && bv > 1) return Expr::constant(0);
      break;
    case ExprOp::Ne:
      if (a == b) return Expr::constant(0);
      if (bc && bv == 0 && is_bool_valued(a)) return a;
      break;
    case ExprOp::Ult:
      if (a == b) return Expr::constant(0);
      if (bc && bv == 0) return Expr::constant(0);
      if (a.is_const() && a.value() == 0xFFFFFFFFu) return Expr::constant(0);
      break;
    case ExprOp::Slt:
      if (a == b) return Expr::constant(0);
      break;
    default:
      break;
  }
  return Expr::raw(op, {std::move(a), std::move(b)});
}

}  // namespace

Expr add(const Expr& a, const Expr& b) { return binary(ExprOp::Add, a, b); }
Expr sub(const Expr& a, const Expr& b) { return binary(ExprOp::Sub, a, b); }
Expr band(const Expr& a, const Expr& b) { return binary(ExprOp::And, a, b); }
Expr bor(const Expr& a, const Expr& b) { return binary(ExprOp::Or, a, b); }
Expr bxor(const Expr& a, const Expr& b) { return binary(ExprOp::Xor, a, b); }
Expr shl(const Expr& a, const Expr& b) { return binary(ExprOp::Shl, a, b); }
Expr shr(const Expr& a, const Expr& b) { return binary(ExprOp::Shr, a, b); }
Expr eq(const Expr& a, const Expr& b) { return binary(ExprOp::Eq, a, b); }
Expr ne(const Expr& a, const Expr& b) { return binary(ExprOp::Ne, a, b); }
Expr ult(const Expr& a, const Expr& b) { return binary(ExprOp::Ult, a, b); }
Expr slt(const Expr& a, const Expr& b) { return binary(ExprOp::Slt, a, b); }

Expr ite(const Expr& c, const Expr& a, const Expr& b) {
  if (c.is_const()) return c.value() ? a : b;
  if (a == b) return a;
  if (is_bool_valued(c) && a.is_const() && b.is_const() && a.value() == 1 && b.value() == 0) return c;
  return Expr::raw(ExprOp::Ite, {c, a, b});
}

Expr build(ExprOp op, const std::vector<Expr>& kids) {
  switch (op) {
    case ExprOp::Const:
    case ExprOp::Var:
      return kids.empty() ? Expr() : kids[0];
    case ExprOp::Ite:
      return ite(kids[0], kids[1], kids[2]);
    default:
      return binary(op, kids[0], kids[1]);
  }
}

Expr logical_not(const Expr& c) { return eq(c, Expr::constant(0)); }

Expr mul_const(const Expr& a, uint32_t k) {
  Expr acc = Expr::constant(0);
  for (uint32_t bit = 0; bit < 32; ++bit) {
    if (k & (1u << bit)) acc = add(acc, shl(a, Expr::constant(bit)));
  }
  return acc;
}

namespace {

template <typename Leaf>
Expr rebuild(const Expr& e, std::unordered_map<const ExprNode*, Expr>& memo, const Leaf& leaf) {
  if (!e.has_vars() && e.is_const()) return e;
  if (auto it = memo.find(e.node()); it != memo.end()) return it->second;
  Expr out;
  if (e.is_const()) {
    out = e;
  } else if (e.is_var()) {
    out = leaf(e);
  } else {
    std::vector<Expr> kids;
    kids.reserve(e.kids().size());
    for (const auto& k : e.kids()) kids.push_back(rebuild(k, memo, leaf));
    out = build(e.op(), kids);
  }
  memo.emplace(e.node(), out);
  return out;
}

}  // namespace

Expr simplify(const Expr& e) {
  std::unordered_map<const ExprNode*, Expr> memo;
  return rebuild(e, memo, [](const Expr& v) { return v; });
}

Expr substitute(const Expr& e, const Model& m) {
  if (!e.has_vars() || m.empty()) return e;
  std::unordered_map<const ExprNode*, Expr> memo;
  return rebuild(e, memo, [&m](const Expr& v) {
    auto it = m.find(v.name());
    return it == m.end() ? v : Expr::constant(it->second);
  });
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& m) {
  if (!e.has_vars() || m.empty()) return e;
  std::unordered_map<const ExprNode*, Expr> memo;
  return rebuild(e, memo, [&m](const Expr& v) {
    auto it = m.find(v.name());
    return it == m.end() ? v : it->second;
  });
}

namespace {

uint32_t eval_rec(const Expr& e, const Model& m, std::unordered_map<const ExprNode*, uint32_t>& memo) {
  switch (e.op()) {
    case ExprOp::Const:
      return e.value();
    case ExprOp::Var: {
      auto it = m.find(e.name());
      if (it == m.end()) throw Error(ErrorKind::UnboundVariable, e.name());
      return it->second;
    }
    default:
      break;
  }
  if (auto it = memo.find(e.node()); it != memo.end()) return it->second;
  uint32_t r;
  if (e.op() == ExprOp::Ite) {
    r = eval_rec(e.kids()[0], m, memo) ? eval_rec(e.kids()[1], m, memo) : eval_rec(e.kids()[2], m, memo);
  } else {
    r = apply_op(e.op(), eval_rec(e.kids()[0], m, memo), eval_rec(e.kids()[1], m, memo));
  }
  memo.emplace(e.node(), r);
  return r;
}

template <typename Fn>
void visit(const Expr& e, std::set<const ExprNode*>& seen, const Fn& fn) {
  if (!e.has_vars()) return;
  if (!seen.insert(e.node()).second) return;
  fn(e);
  for (const auto& k : e.kids()) visit(k, seen, fn);
}

}  // namespace

uint32_t eval(const Expr& e, const Model& m) {
  std::unordered_map<const ExprNode*, uint32_t> memo;
  return eval_rec(e, m, memo);
}

void collect_vars(const Expr& e, std::map<std::string, VarInfo>& out) {
  std::set<const ExprNode*> seen;
  visit(e, seen, [&out](const Expr& x) {
    if (x.is_var()) out.emplace(x.name(), VarInfo{x.origin(), x.tag()});
  });
}

std::map<std::string, VarInfo> free_vars(const Expr& e) {
  std::map<std::string, VarInfo> out;
  collect_vars(e, out);
  return out;
}

bool mentions(const Expr& e, const std::string& var_name) {
  bool found = false;
  std::set<const ExprNode*> seen;
  visit(e, seen, [&](const Expr& x) { found = found || (x.is_var() && x.name() == var_name); });
  return found;
}

bool mentions_origin(const Expr& e, Origin origin) {
  bool found = false;
  std::set<const ExprNode*> seen;
  visit(e, seen, [&](const Expr& x) { found = found || (x.is_var() && x.origin() == origin); });
  return found;
}

void collect_mask_tests(const Expr& e, std::map<std::string, uint32_t>& masks_by_var) {
  std::set<const ExprNode*> seen;
  visit(e, seen, [&](const Expr& x) {
    if (x.op() != ExprOp::And) return;
    const Expr& a = x.kids()[0];
    const Expr& b = x.kids()[1];
    if (a.is_var() && b.is_const()) masks_by_var[a.name()] |= b.value();
    if (b.is_var() && a.is_const()) masks_by_var[b.name()] |= a.value();
  });
}

namespace {

void prefix_rec(const Expr& e, std::ostringstream& os) {
  switch (e.op()) {
    case ExprOp::Const: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%x", e.value());
      os << buf;
      return;
    }
    case ExprOp::Var:
      os << e.name();
      return;
    default:
      os << '(' << to_string(e.op());
      for (const auto& k : e.kids()) {
        os << ' ';
        prefix_rec(k, os);
      }
      os << ')';
  }
}

}  // namespace

std::string to_prefix(const Expr& e) {
  std::ostringstream os;
  prefix_rec(e, os);
  return os.str();
}

}  // namespace irqsym
