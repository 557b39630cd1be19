#include "sat.hpp"

#include <algorithm>
#include <cstdlib>

namespace irqsym::sat {

int Solver::new_var() {
  int v = static_cast<int>(assign_.size());
  assign_.push_back(0);
  level_.push_back(0);
  reason_.push_back(-1);
  phase_.push_back(-1);
  activity_.push_back(0.0);
  heap_pos_.push_back(-1);
  seen_.push_back(0);
  watches_.resize(2 * static_cast<size_t>(v) + 2);
  heap_insert(v);
  return v;
}

void Solver::attach(int ci) {
  const auto& c = clauses_[ci].lits;
  watches_[idx(-c[0])].push_back(ci);
  watches_[idx(-c[1])].push_back(ci);
}

bool Solver::add_clause(std::vector<int> lits) {
  if (unsat_) return false;
  std::sort(lits.begin(), lits.end());
  lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
  std::vector<int> kept;
  for (int l : lits) {
    if (std::binary_search(lits.begin(), lits.end(), -l)) return true;  // tautology
    int8_t v = lit_value(l);
    if (v == 1 && level_[std::abs(l)] == 0) return true;
    if (v == -1 && level_[std::abs(l)] == 0) continue;
    kept.push_back(l);
  }
  if (kept.empty()) {
    unsat_ = true;
    return false;
  }
  if (kept.size() == 1) {
    if (lit_value(kept[0]) == 0) enqueue(kept[0], -1);
    if (propagate() >= 0) {
      unsat_ = true;
      return false;
    }
    return true;
  }
  clauses_.push_back({std::move(kept), false});
  attach(static_cast<int>(clauses_.size()) - 1);
  return true;
}

void Solver::enqueue(int lit, int reason) {
  int v = std::abs(lit);
  assign_[v] = lit > 0 ? 1 : -1;
  level_[v] = static_cast<int>(trail_lim_.size());
  reason_[v] = reason;
  trail_.push_back(lit);
}

int Solver::propagate() {
  while (qhead_ < trail_.size()) {
    int p = trail_[qhead_++];  // p became true; clauses watching -p... stored under idx(p)
    auto& ws = watches_[idx(p)];
    size_t i = 0, j = 0;
    while (i < ws.size()) {
      int ci = ws[i];
      auto& c = clauses_[ci].lits;
      // make sure the false literal is c[1]
      if (c[0] == -p) std::swap(c[0], c[1]);
      if (lit_value(c[0]) == 1) {
        ws[j++] = ws[i++];
        continue;
      }
      bool moved = false;
      for (size_t k = 2; k < c.size(); ++k) {
        if (lit_value(c[k]) != -1) {
          std::swap(c[1], c[k]);
          watches_[idx(-c[1])].push_back(ci);
          moved = true;
          break;
        }
      }
      if (moved) {
        ++i;
        continue;
      }
      ws[j++] = ws[i++];
      if (lit_value(c[0]) == -1) {
        while (i < ws.size()) ws[j++] = ws[i++];
        ws.resize(j);
        return ci;
      }
      enqueue(c[0], ci);
    }
    ws.resize(j);
  }
  return -1;
}

void Solver::bump(int var) {
  activity_[var] += var_inc_;
  if (activity_[var] > 1e100) {
    for (auto& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_pos_[var] >= 0) heap_up(heap_pos_[var]);
}

void Solver::analyze(int confl, std::vector<int>& learnt, int& back_level) {
  learnt.assign(1, 0);
  int counter = 0;
  int p = 0;
  int idx_trail = static_cast<int>(trail_.size()) - 1;
  const int cur = static_cast<int>(trail_lim_.size());
  std::vector<int> to_clear;
  do {
    const auto& c = clauses_[confl].lits;
    for (int q : c) {
      if (q == p) continue;
      int v = std::abs(q);
      if (seen_[v] || level_[v] == 0) continue;
      seen_[v] = 1;
      to_clear.push_back(v);
      bump(v);
      if (level_[v] == cur) {
        ++counter;
      } else {
        learnt.push_back(q);
      }
    }
    while (!seen_[std::abs(trail_[idx_trail])]) --idx_trail;
    p = trail_[idx_trail];
    --idx_trail;
    confl = reason_[std::abs(p)];
    seen_[std::abs(p)] = 0;
    --counter;
  } while (counter > 0);
  learnt[0] = -p;
  for (int v : to_clear) seen_[v] = 0;
  back_level = 0;
  if (learnt.size() > 1) {
    size_t max_i = 1;
    for (size_t i = 2; i < learnt.size(); ++i) {
      if (level_[std::abs(learnt[i])] > level_[std::abs(learnt[max_i])]) max_i = i;
    }
    std::swap(learnt[1], learnt[max_i]);
    back_level = level_[std::abs(learnt[1])];
  }
  var_inc_ *= 1.0 / 0.95;
}

void Solver::backtrack(int level) {
  if (static_cast<int>(trail_lim_.size()) <= level) return;
  for (int i = static_cast<int>(trail_.size()) - 1; i >= trail_lim_[level]; --i) {
    int v = std::abs(trail_[i]);
    phase_[v] = assign_[v];
    assign_[v] = 0;
    reason_[v] = -1;
    if (heap_pos_[v] < 0) heap_insert(v);
  }
  trail_.resize(trail_lim_[level]);
  trail_lim_.resize(level);
  qhead_ = trail_.size();
}

void Solver::heap_insert(int var) {
  heap_pos_[var] = static_cast<int>(heap_.size());
  heap_.push_back(var);
  heap_up(heap_pos_[var]);
}

void Solver::heap_up(int pos) {
  int v = heap_[pos];
  while (pos > 0) {
    int parent = (pos - 1) / 2;
    if (activity_[heap_[parent]] >= activity_[v]) break;
    heap_[pos] = heap_[parent];
    heap_pos_[heap_[pos]] = pos;
    pos = parent;
  }
  heap_[pos] = v;
  heap_pos_[v] = pos;
}

void Solver::heap_down(int pos) {
  int v = heap_[pos];
  const int n = static_cast<int>(heap_.size());
  while (true) {
    int child = 2 * pos + 1;
    if (child >= n) break;
    if (child + 1 < n && activity_[heap_[child + 1]] > activity_[heap_[child]]) ++child;
    if (activity_[heap_[child]] <= activity_[v]) break;
    heap_[pos] = heap_[child];
    heap_pos_[heap_[pos]] = pos;
    pos = child;
  }
  heap_[pos] = v;
  heap_pos_[v] = pos;
}

int Solver::heap_pop() {
  int top = heap_[0];
  heap_pos_[top] = -1;
  int last = heap_.back();
  heap_.pop_back();
  if (!heap_.empty()) {
    heap_[0] = last;
    heap_pos_[last] = 0;
    heap_down(0);
  }
  return top;
}

int Solver::pick_branch() {
  while (!heap_.empty()) {
    int v = heap_pop();
    if (assign_[v] == 0) return v;
  }
  return 0;
}

namespace {

uint64_t luby(uint64_t i) {
  // i is 1-based
  uint64_t k = 1;
  while ((uint64_t{1} << k) - 1 < i) ++k;
  while (true) {
    if (i == (uint64_t{1} << k) - 1) return uint64_t{1} << (k - 1);
    i -= (uint64_t{1} << (k - 1)) - 1;
    k = 1;
    while ((uint64_t{1} << k) - 1 < i) ++k;
  }
}

}  // namespace

Result Solver::solve(uint64_t budget) {
  if (unsat_) return Result::Unsat;
  if (propagate() >= 0) {
    unsat_ = true;
    return Result::Unsat;
  }
  uint64_t restart_n = 1;
  uint64_t conflicts_until_restart = 100 * luby(restart_n);
  std::vector<int> learnt;
  while (true) {
    int confl = propagate();
    if (confl >= 0) {
      ++steps_;
      if (trail_lim_.empty()) {
        unsat_ = true;
        return Result::Unsat;
      }
      int back_level = 0;
      analyze(confl, learnt, back_level);
      backtrack(back_level);
      if (learnt.size() == 1) {
        enqueue(learnt[0], -1);
      } else {
        clauses_.push_back({learnt, true});
        int ci = static_cast<int>(clauses_.size()) - 1;
        attach(ci);
        enqueue(learnt[0], ci);
      }
      if (--conflicts_until_restart == 0) {
        backtrack(0);
        conflicts_until_restart = 100 * luby(++restart_n);
      }
    } else {
      if (steps_ >= budget) return Result::Budget;
      int v = pick_branch();
      if (v == 0) return Result::Sat;
      ++steps_;
      trail_lim_.push_back(static_cast<int>(trail_.size()));
      enqueue(phase_[v] == 1 ? v : -v, -1);
    }
  }
}

}  // namespace irqsym::sat
