#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adcell/model.hpp"
#include "adcell/rational.hpp"
#include "adcell/rng.hpp"

namespace adcell {

// (4 - max_i max_j u_ij / b_i) / 4, the rounding guarantee. Requires every
// bid to be at most the bidder's budget.
Rat approx_ratio_bound(const Instance& inst);

// Breaks every cycle in the support graph of the strictly fractional values,
// preserving the objective and every assign/capacity/budget row exactly.
FractionalAssignment forestify(const Instance& inst, const FractionalAssignment& y);

// Underdetermined linear subsystem over local variables with implicit [0,1]
// boxes. Equalities are the rows a rounding step must keep exact; guards are
// inequality rows it must not cross.
struct Subsystem {
  int num_vars = 0;
  std::vector<std::pair<std::vector<Rat>, Rat>> equalities;  // a.x == rhs
  std::vector<std::pair<std::vector<Rat>, Rat>> guards;      // a.x <= rhs
};

struct RandMoveStep {
  std::vector<Rat> direction;
  Rat alpha;       // max feasible step along +direction
  Rat beta;        // max feasible step along -direction
  Rat prob_plus;   // beta / (alpha + beta)
  bool took_plus = false;
};

// One randomized rounding step: x moves to x + alpha*r with probability
// beta/(alpha+beta) and to x - beta*r otherwise, where r spans the null space
// of the equality rows and alpha/beta are maximal. The expectation of the
// result equals the input componentwise, every equality still holds exactly,
// and at least one variable lands on {0,1} or one guard becomes tight.
std::vector<Rat> rand_move(const Subsystem& sub, const std::vector<Rat>& current, Rng& rng,
                           RandMoveStep* step = nullptr);

// Audit log of the case engine.
struct RoundingTrace {
  struct Step {
    std::string label;  // cycle-break, case-i, subcase-1..4, tree-randmove, subcase-5:*, case-iii:*
    std::vector<std::pair<int, int>> edges;               // (advertiser, query) in path order
    Rat alpha;
    Rat beta;
    int branch = 0;                                       // +1 / -1 randomized, 0 deterministic
    std::vector<std::pair<std::pair<int, int>, Rat>> fixed;  // edges that hit 0/1 this step
  };
  std::vector<Step> steps;

  std::string to_jsonl() const;
};

struct RoundingOptions {
  bool record_trace = true;
  bool check_each_step = false;  // exact assign/capacity verification after every step
};

struct RoundingResult {
  IntegralAssignment assignment;
  RoundingTrace trace;
};

// Rounds an optimal fractional solution of the realized budget+capacity LP to
// an integral assignment. Assign and capacity rows hold exactly after every
// step; budgets may overshoot and are capped at revenue evaluation. y_star is
// checked for feasibility (optimality is assumed).
RoundingResult round_offline(const Instance& inst, const Scenario& scenario, const FractionalAssignment& y_star,
                             Rng& rng, const RoundingOptions& opts = {});

}  // namespace adcell
