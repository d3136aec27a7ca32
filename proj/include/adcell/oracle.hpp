#pragma once

#include "adcell/model.hpp"
#include "adcell/rational.hpp"

namespace adcell {

struct OfflineOptimum {
  Rat value;
  IntegralAssignment assignment;
};

// Exhaustive offline optimum for one realized scenario: every arrived query
// goes to one bidding advertiser or is discarded, capacities hard, payment
// budget-capped. Guard: (m+1)^{arrived} <= 10^7.
OfflineOptimum offline_opt_exact(const Instance& inst, const Scenario& scenario);

// Probability-weighted offline optimum over every scenario, enumerated
// exhaustively per exclusivity group. Guard: product of (group size + 1)
// over groups <= 10^6.
Rat expected_offline_opt_exact(const Instance& inst);

// Value of the optimal online policy: backward induction over exclusivity
// groups in arrival order, state = (remaining capacities, exact per-advertiser
// spends). Guard: <= 10^6 memoized states.
Rat online_opt_exact(const Instance& inst);

}  // namespace adcell
