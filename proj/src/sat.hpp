#pragma once

// Minimal CDCL SAT solver: two watched literals, first-UIP learning,
// VSIDS-style activities with a binary heap, phase saving and Luby restarts.
// Literals are DIMACS-style nonzero ints.

#include <cstdint>
#include <vector>

namespace irqsym::sat {

enum class Result { Sat, Unsat, Budget };

class Solver {
 public:
  int new_var();
  int num_vars() const { return static_cast<int>(assign_.size()) - 1; }
  /// Adds a clause at decision level 0. Returns false once the formula is
  /// known to be unsatisfiable.
  bool add_clause(std::vector<int> lits);
  /// `budget` counts decisions plus conflicts.
  Result solve(uint64_t budget);
  bool value(int var) const { return assign_[var] == 1; }
  uint64_t steps() const { return steps_; }

 private:
  struct Clause {
    std::vector<int> lits;
    bool learnt = false;
  };

  static int idx(int lit) { return lit > 0 ? 2 * lit : 2 * -lit + 1; }
  int8_t lit_value(int lit) const {
    int8_t v = assign_[lit > 0 ? lit : -lit];
    return lit > 0 ? v : static_cast<int8_t>(-v);
  }
  void enqueue(int lit, int reason);
  int propagate();  // returns conflicting clause index or -1
  void analyze(int confl, std::vector<int>& learnt, int& back_level);
  void backtrack(int level);
  int pick_branch();
  void bump(int var);
  void heap_insert(int var);
  void heap_up(int pos);
  void heap_down(int pos);
  int heap_pop();
  void attach(int ci);

  std::vector<Clause> clauses_;
  std::vector<std::vector<int>> watches_;  // by literal index -> clause ids
  std::vector<int8_t> assign_{0};          // 1 true, -1 false, 0 unassigned
  std::vector<int> level_{0};
  std::vector<int> reason_{-1};
  std::vector<int8_t> phase_{0};
  std::vector<double> activity_{0.0};
  std::vector<int> heap_;
  std::vector<int> heap_pos_{-1};
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  std::vector<char> seen_{0};
  size_t qhead_ = 0;
  double var_inc_ = 1.0;
  bool unsat_ = false;
  uint64_t steps_ = 0;
};

}  // namespace irqsym::sat
