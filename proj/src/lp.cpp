#include "adcell/lp.hpp"

#include <algorithm>
#include <sstream>

namespace adcell {

LinearProgram build_lp(const Instance& inst, LpVariant variant, const std::optional<Scenario>& scenario) {
  const auto report = validate_instance(inst);
  if (!report.empty())
    throw StructuralError("invalid instance: " + report.front().path + ": " + report.front().message);
  if (scenario && static_cast<int>(scenario->arrived.size()) != inst.num_queries())
    throw StructuralError("scenario length does not match instance");

  LinearProgram lp;
  for (int j = 0; j < inst.num_queries(); ++j) {
    for (const auto& [i, u] : inst.queries[j].bids) {
      lp.column_index[{i, j}] = lp.num_columns();
      lp.columns.push_back({i, j});
      lp.objective.push_back(u);
    }
  }

  const bool want_budget = variant == LpVariant::B || variant == LpVariant::BC;
  const bool want_capacity = variant == LpVariant::C || variant == LpVariant::BC;

  for (int j = 0; j < inst.num_queries(); ++j) {
    LpRow row{RowKind::Assign, j, {}, Rat(0)};
    for (const auto& [i, u] : inst.queries[j].bids) row.coeffs.push_back({lp.column_index.at({i, j}), Rat(1)});
    if (row.coeffs.empty()) continue;
    row.rhs = scenario ? Rat(scenario->has(j) ? 1 : 0) : inst.queries[j].prob;
    lp.rows.push_back(std::move(row));
  }
  if (want_capacity) {
    for (int k = 0; k < inst.num_customers(); ++k) {
      LpRow row{RowKind::Capacity, k, {}, Rat(inst.customers[k].capacity)};
      for (int j = 0; j < inst.num_queries(); ++j) {
        if (inst.queries[j].customer != k) continue;
        for (const auto& [i, u] : inst.queries[j].bids) row.coeffs.push_back({lp.column_index.at({i, j}), Rat(1)});
      }
      if (!row.coeffs.empty()) lp.rows.push_back(std::move(row));
    }
  }
  if (want_budget) {
    for (int i = 0; i < inst.num_advertisers(); ++i) {
      LpRow row{RowKind::Budget, i, {}, inst.advertisers[i].budget};
      for (int c = 0; c < lp.num_columns(); ++c)
        if (lp.columns[c].first == i) row.coeffs.push_back({c, lp.objective[c]});
      if (!row.coeffs.empty()) lp.rows.push_back(std::move(row));
    }
  }
  for (int c = 0; c < lp.num_columns(); ++c)
    lp.rows.push_back({RowKind::UpperBound, c, {{c, Rat(1)}}, Rat(1)});
  return lp;
}

namespace {

// Dense two-phase tableau. Bland's rule (lowest eligible index entering,
// lowest basic index on ratio ties) guarantees termination under degeneracy.
class SimplexTableau {
 public:
  SimplexTableau(const LinearProgram& lp) : num_structural_(lp.num_columns()) {
    const int m = static_cast<int>(lp.rows.size());
    const int n = num_structural_;
    num_total_ = n + m;  // structural + one slack per row
    rows_.assign(m, std::vector<Rat>(num_total_ + 1, Rat(0)));
    basis_.assign(m, -1);
    for (int r = 0; r < m; ++r) {
      for (const auto& [c, a] : lp.rows[r].coeffs) rows_[r][c] += a;
      rows_[r][n + r] = 1;
      rows_[r][num_total_] = lp.rows[r].rhs;
    }
    objective_ = lp.objective;
    objective_.resize(num_total_, Rat(0));
  }

  LpStatus solve() {
    const int m = static_cast<int>(rows_.size());
    const int n_before_artificials = num_total_;
    bool need_phase1 = false;
    for (int r = 0; r < m; ++r) {
      if (rhs(r) < 0) {
        negate_row(r);
        need_phase1 = true;
      } else {
        basis_[r] = num_structural_ + r;  // slack
      }
    }
    if (need_phase1) {
      for (int r = 0; r < m; ++r) {
        if (basis_[r] != -1) continue;
        for (auto& row : rows_) row.insert(row.end() - 1, Rat(0));
        rows_[r][num_total_] = 1;
        basis_[r] = num_total_;
        ++num_total_;
      }
      // Phase 1: maximize -(sum of artificials).
      std::vector<Rat> phase1(num_total_, Rat(0));
      for (int v = n_before_artificials; v < num_total_; ++v) phase1[v] = -1;
      cost_ = phase1;
      cost_rhs_ = 0;
      for (int r = 0; r < m; ++r)
        if (basis_[r] >= n_before_artificials) add_row_to_cost(r, Rat(1));  // price out
      if (run() == LpStatus::Unbounded) throw InternalError("phase-1 objective unbounded");
      if (cost_rhs_ != 0) return LpStatus::Infeasible;
      drive_out_artificials(n_before_artificials);
    }
    // Phase 2 with the real objective, priced out over the current basis.
    cost_ = objective_;
    cost_.resize(num_total_, Rat(0));
    for (int v = n_before_artificials; v < num_total_; ++v) cost_[v] = 0;
    cost_rhs_ = 0;
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r)
      if (cost_[basis_[r]] != 0) add_row_to_cost(r, -cost_[basis_[r]]);
    artificial_floor_ = need_phase1 ? n_before_artificials : num_total_;
    return run();
  }

  std::vector<Rat> values() const {
    std::vector<Rat> x(num_structural_, Rat(0));
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r)
      if (basis_[r] < num_structural_) x[basis_[r]] = rhs(r);
    return x;
  }

 private:
  Rat rhs(int r) const { return rows_[r][num_total_]; }

  void negate_row(int r) {
    for (auto& v : rows_[r]) v = -v;
  }

  void add_row_to_cost(int r, const Rat& mult) {
    for (int c = 0; c <= num_total_; ++c) {
      if (rows_[r][c] == 0) continue;
      if (c == num_total_)
        cost_rhs_ += mult * rows_[r][c];
      else
        cost_[c] += mult * rows_[r][c];
    }
  }

  void pivot(int r, int e) {
    const Rat p = rows_[r][e];
    for (auto& v : rows_[r]) v /= p;
    for (int r2 = 0; r2 < static_cast<int>(rows_.size()); ++r2) {
      if (r2 == r || rows_[r2][e] == 0) continue;
      const Rat f = rows_[r2][e];
      for (int c = 0; c <= num_total_; ++c)
        if (rows_[r][c] != 0) rows_[r2][c] -= f * rows_[r][c];
    }
    if (cost_[e] != 0) {
      const Rat f = cost_[e];
      for (int c = 0; c < num_total_; ++c)
        if (rows_[r][c] != 0) cost_[c] -= f * rows_[r][c];
      cost_rhs_ -= f * rows_[r][num_total_];  // cost_rhs_ tracks the negated objective
    }
    basis_[r] = e;
  }

  LpStatus run() {
    while (true) {
      int enter = -1;
      for (int c = 0; c < num_total_; ++c) {
        if (c >= artificial_floor_) continue;
        if (cost_[c] > 0) {
          enter = c;
          break;
        }
      }
      if (enter == -1) return LpStatus::Optimal;
      int leave = -1;
      Rat best_ratio;
      for (int r = 0; r < static_cast<int>(rows_.size()); ++r) {
        if (rows_[r][enter] <= 0) continue;
        Rat ratio = rhs(r) / rows_[r][enter];
        if (leave == -1 || ratio < best_ratio || (ratio == best_ratio && basis_[r] < basis_[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave == -1) return LpStatus::Unbounded;
      pivot(leave, enter);
    }
  }

  void drive_out_artificials(int artificial_start) {
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r) {
      if (basis_[r] < artificial_start) continue;
      int e = -1;
      for (int c = 0; c < artificial_start; ++c) {
        if (rows_[r][c] != 0) {
          e = c;
          break;
        }
      }
      if (e != -1) {
        pivot(r, e);
      } else {
        // Redundant row: everything non-artificial is zero (rhs is zero too,
        // since phase 1 ended at optimum 0).
        rows_.erase(rows_.begin() + r);
        basis_.erase(basis_.begin() + r);
        --r;
      }
    }
  }

  int num_structural_;
  int num_total_;
  int artificial_floor_ = 1 << 30;
  std::vector<std::vector<Rat>> rows_;
  std::vector<int> basis_;
  std::vector<Rat> cost_;      // reduced costs
  Rat cost_rhs_;               // current objective value
  std::vector<Rat> objective_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  LpSolution sol;
  if (lp.num_columns() == 0) {
    sol.status = LpStatus::Optimal;
    sol.objective_value = 0;
    return sol;
  }
  SimplexTableau tab(lp);
  sol.status = tab.solve();
  if (sol.status != LpStatus::Optimal) return sol;
  sol.values = tab.values();
  sol.objective_value = 0;
  for (int c = 0; c < lp.num_columns(); ++c) sol.objective_value += lp.objective[c] * sol.values[c];
  check_solution_feasible(lp, sol);
  return sol;
}

LpSolution lp_round_trip(const Instance& inst, LpVariant variant, const std::optional<Scenario>& scenario) {
  return solve_lp(build_lp(inst, variant, scenario));
}

void check_solution_feasible(const LinearProgram& lp, const LpSolution& sol) {
  if (sol.status != LpStatus::Optimal) return;
  for (int c = 0; c < lp.num_columns(); ++c)
    if (sol.values[c] < 0) throw InternalError("simplex returned negative value");
  for (const auto& row : lp.rows) {
    Rat lhs(0);
    for (const auto& [c, a] : row.coeffs) lhs += a * sol.values[c];
    if (lhs > row.rhs) throw InternalError("simplex solution violates a row");
  }
}

FractionalAssignment solution_to_assignment(const LinearProgram& lp, const LpSolution& sol) {
  FractionalAssignment y;
  for (int c = 0; c < lp.num_columns(); ++c)
    if (sol.values[c] != 0) y.values[lp.columns[c]] = sol.values[c];
  return y;
}

namespace {

std::string column_name(const LinearProgram& lp, int c) {
  return "x_" + std::to_string(lp.columns[c].first) + "_" + std::to_string(lp.columns[c].second);
}

std::string row_label(const LpRow& row) {
  switch (row.kind) {
    case RowKind::Assign: return "assign[q" + std::to_string(row.entity) + "]";
    case RowKind::Capacity: return "capacity[c" + std::to_string(row.entity) + "]";
    case RowKind::Budget: return "budget[a" + std::to_string(row.entity) + "]";
    case RowKind::UpperBound: return "bound[" + std::to_string(row.entity) + "]";
  }
  return "?";
}

}  // namespace

std::string dump_lp(const LinearProgram& lp) {
  std::ostringstream out;
  out << "maximize:";
  for (int c = 0; c < lp.num_columns(); ++c) {
    out << (c == 0 ? " " : " + ") << rational_to_string(lp.objective[c]) << " " << column_name(lp, c);
  }
  out << "\nsubject to:\n";
  for (const auto& row : lp.rows) {
    out << "  " << row_label(row) << ":";
    bool first = true;
    for (const auto& [c, a] : row.coeffs) {
      out << (first ? " " : " + ");
      if (a != 1) out << rational_to_string(a) << " ";
      out << column_name(lp, c);
      first = false;
    }
    out << " <= " << rational_to_string(row.rhs) << "\n";
  }
  out << "  x >= 0\n";
  return out.str();
}

}  // namespace adcell
