#pragma once

// 32-bit bitvector expressions. Nodes are immutable and shared; the builder
// functions fold constants and apply local identities as they go, so most
// concrete computation never allocates more than a Const.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace irqsym {

/// Where a symbolic variable came from. PROBE variables are always bound to
/// a concrete value; they exist so that the engine can observe how a
/// peripheral read is consumed (bit tests, stores) without forking on it.
enum class Origin : uint8_t { SR, DR, GLOBAL, PROBE };

const char* to_string(Origin o);

enum class ExprOp : uint8_t { Const, Var, Add, Sub, And, Or, Xor, Shl, Shr, Eq, Ne, Ult, Slt, Ite };

const char* to_string(ExprOp op);
bool is_comparison(ExprOp op);

struct ExprNode;

class Expr {
 public:
  Expr();  // Const 0
  static Expr constant(uint32_t v);
  static Expr var(const std::string& name, Origin origin, uint32_t tag = 0);
  /// Builds a node without any simplification.
  static Expr raw(ExprOp op, std::vector<Expr> kids);

  ExprOp op() const;
  bool is_const() const { return op() == ExprOp::Const; }
  bool is_var() const { return op() == ExprOp::Var; }
  uint32_t value() const;  // Const only
  const std::string& name() const;  // Var only
  Origin origin() const;  // Var only
  uint32_t tag() const;   // Var only
  const std::vector<Expr>& kids() const;
  bool has_vars() const;
  size_t hash() const;
  const ExprNode* node() const { return node_.get(); }

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  ExprOp op = ExprOp::Const;
  uint32_t value = 0;
  Origin origin = Origin::GLOBAL;
  uint32_t tag = 0;
  std::string name;
  std::vector<Expr> kids;
  size_t hash = 0;
  bool has_vars = false;
};

using Model = std::map<std::string, uint32_t>;

struct VarInfo {
  Origin origin;
  uint32_t tag;
};

// Simplifying builders.
Expr add(const Expr& a, const Expr& b);
Expr sub(const Expr& a, const Expr& b);
Expr band(const Expr& a, const Expr& b);
Expr bor(const Expr& a, const Expr& b);
Expr bxor(const Expr& a, const Expr& b);
Expr shl(const Expr& a, const Expr& b);
Expr shr(const Expr& a, const Expr& b);
Expr eq(const Expr& a, const Expr& b);
Expr ne(const Expr& a, const Expr& b);
Expr ult(const Expr& a, const Expr& b);
Expr slt(const Expr& a, const Expr& b);
Expr ite(const Expr& c, const Expr& a, const Expr& b);
Expr build(ExprOp op, const std::vector<Expr>& kids);

/// Boolean negation of a constraint (nonzero = true).
Expr logical_not(const Expr& c);
/// a * k for a constant k, as a shift-and-add chain.
Expr mul_const(const Expr& a, uint32_t k);

uint32_t apply_op(ExprOp op, uint32_t a, uint32_t b);

Expr simplify(const Expr& e);
/// Throws UnboundVariable for any free variable missing from `m`.
uint32_t eval(const Expr& e, const Model& m);
/// Replaces variables that appear in `m` by constants, then simplifies.
Expr substitute(const Expr& e, const Model& m);
Expr substitute(const Expr& e, const std::map<std::string, Expr>& m);

std::map<std::string, VarInfo> free_vars(const Expr& e);
void collect_vars(const Expr& e, std::map<std::string, VarInfo>& out);
bool mentions(const Expr& e, const std::string& var_name);
bool mentions_origin(const Expr& e, Origin origin);

/// Masks `m` for every subterm of the form (v & m) with v a variable
/// satisfying `pred`; used to recover bit tests from branch conditions.
void collect_mask_tests(const Expr& e, std::map<std::string, uint32_t>& masks_by_var);

/// Prefix (S-expression) rendering; stable and used as a canonical key.
std::string to_prefix(const Expr& e);

}  // namespace irqsym
