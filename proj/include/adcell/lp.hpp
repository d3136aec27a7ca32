#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adcell/model.hpp"
#include "adcell/rational.hpp"

namespace adcell {

// Which constraint families the relaxation carries: budget rows (B),
// capacity rows (C), or both.
enum class LpVariant { B, C, BC };

enum class RowKind {
  Assign,      // per query j: sum_i x_ij <= I_j (arrival indicator or p_j)
  Capacity,    // per customer k: sum over the customer's queries <= c_k
  Budget,      // per advertiser i: sum_j u_ij x_ij <= b_i
  UpperBound,  // per column: x <= 1 (bounds kept as explicit rows)
};

struct LpRow {
  RowKind kind;
  int entity;  // query / customer / advertiser / column index, per kind
  std::vector<std::pair<int, Rat>> coeffs;  // sparse (column, coefficient)
  Rat rhs;
};

// Maximization program over columns x in [0,1], all rows of the form a.x <= rhs.
struct LinearProgram {
  std::vector<std::pair<int, int>> columns;  // column -> (advertiser, query)
  std::vector<Rat> objective;                // per column
  std::vector<LpRow> rows;
  std::map<std::pair<int, int>, int> column_index;

  int num_columns() const { return static_cast<int>(columns.size()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  std::vector<Rat> values;  // per column, exact
  Rat objective_value;
};

// Columns exist only for positive bids. Expectation mode (no scenario) uses
// p_j as the assign-row right hand side; realized mode uses the 0/1 arrival.
LinearProgram build_lp(const Instance& inst, LpVariant variant,
                       const std::optional<Scenario>& scenario = std::nullopt);

// Dense-tableau simplex with exact rational pivots and Bland's rule.
LpSolution solve_lp(const LinearProgram& lp);

LpSolution lp_round_trip(const Instance& inst, LpVariant variant,
                         const std::optional<Scenario>& scenario = std::nullopt);

// Human-readable dump (objective and rows, rationals as p/q) for
// cross-checking against external solvers.
std::string dump_lp(const LinearProgram& lp);

FractionalAssignment solution_to_assignment(const LinearProgram& lp, const LpSolution& sol);

// Residual check: every row satisfied exactly. Throws InternalError on failure.
void check_solution_feasible(const LinearProgram& lp, const LpSolution& sol);

}  // namespace adcell
