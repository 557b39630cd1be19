#pragma once

// Decision procedure for conjunctions of 32-bit bitvector constraints.
// Word-level preprocessing (folding, equality propagation) followed by
// bit-blasting into CNF and a CDCL search. Complete for the whole
// expression language; the only non-answer is SolverBudgetExhausted.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irqsym/expr.hpp"

namespace irqsym {

inline constexpr uint64_t kDefaultSolverBudget = 1'000'000;

struct SolveResult {
  bool sat = false;
  Model model;  // assigns every free variable of the query when sat
};

/// Throws Error(SolverBudgetExhausted) when the search budget runs out.
SolveResult solve(const std::vector<Expr>& constraints, uint64_t budget = kDefaultSolverBudget);

/// Convenience: satisfiability only.
bool is_sat(const std::vector<Expr>& constraints, uint64_t budget = kDefaultSolverBudget);

/// Witness for `var` with the fewest set bits, ties broken towards the
/// numerically smallest value. nullopt if the constraints are unsatisfiable.
/// The returned model assigns the remaining variables consistently.
std::optional<Model> solve_minimal(const std::vector<Expr>& constraints, const std::string& var,
                                   uint64_t budget = kDefaultSolverBudget);

/// Up to `limit` distinct values `e` can take under the constraints, in
/// discovery order.
std::vector<uint32_t> enumerate_values(const std::vector<Expr>& constraints, const Expr& e,
                                       size_t limit, uint64_t budget = kDefaultSolverBudget);

/// QF_BV SMT-LIB2 script asserting every constraint as nonzero.
std::string emit_smtlib(const std::vector<Expr>& constraints);

/// Running total of search steps across all queries in this process.
uint64_t solver_steps_total();
uint64_t solver_queries_total();

}  // namespace irqsym
