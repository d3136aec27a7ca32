#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adcell/model.hpp"
#include "adcell/rational.hpp"
#include "adcell/rng.hpp"

namespace adcell {

// One entry per exclusivity group, in arrival order. `arrived` is the query
// delivered by the sampler, or empty when the group produced no arrival.
struct StreamEvent {
  int64_t time = 0;
  int group = 0;
  std::optional<int> arrived;
};
using Stream = std::vector<StreamEvent>;

enum class DecisionKind { NoArrival, Discarded, Allocated };

struct Decision {
  int group = 0;
  std::optional<int> query;
  std::optional<int> advertiser;
  DecisionKind kind = DecisionKind::NoArrival;
};

struct AllocationLog {
  std::vector<Decision> decisions;
  std::vector<Rat> spend;  // per advertiser, uncapped bid mass
  std::vector<int> usage;  // per customer, ads delivered
};

// sum_i min(spend_i, b_i) — the budget-capped payment.
Rat capped_revenue(const Instance& inst, const AllocationLog& log);
// sum_i spend_i — the capacity-only objective (no budgets in that variant).
Rat uncapped_revenue(const AllocationLog& log);

// Conditional expected-revenue-to-go tables, one per customer, built from a
// fractional expectation-LP solution. Partition t (1-based) is the customer's
// t-th exclusivity group in time order; r is remaining capacity.
struct DpTables {
  struct CustomerTable {
    std::vector<int64_t> times;                 // group times, ascending
    std::vector<std::vector<Rat>> value_to_go;  // [t][r], t in [1, u+1], r in [0, c_k]

    int num_partitions() const { return static_cast<int>(times.size()); }
    int partition_of(int64_t time) const;  // 1-based
  };
  std::vector<CustomerTable> per_customer;
};

// Throws StructuralError if some query's mass exceeds its arrival probability
// (an infeasible expectation-LP solution).
DpTables build_dp_tables(const Instance& inst, const FractionalAssignment& x_star);

// Precomputed draw thresholds and tables shared across Monte Carlo trials.
struct OnlinePolicy {
  const Instance* inst = nullptr;
  // Per query, the arrival draw: advertiser k wins when the uniform draw
  // falls below draw_cum[j][k] (cumulative x*_ij / p_j); past the end it is a
  // discard.
  std::vector<std::vector<int>> draw_advertisers;
  std::vector<std::vector<Rat>> draw_cum;
  DpTables dp;
  bool use_dp = false;
};

OnlinePolicy build_online_policy(const Instance& inst, const FractionalAssignment& x_star, bool with_dp);

// Shared allocator loop: on each arrival draw one advertiser (probability
// x*_ij / p_j, residual discards), then, when the policy carries DP tables,
// allocate only if doing so does not lower the customer's expected
// revenue-to-go. The draw happens first, then the DP test, so runs replay
// bit-for-bit from the seed.
AllocationLog run_online_policy(const OnlinePolicy& policy, const Stream& stream, Rng& rng);

// Budget-only allocator: always delivers the drawn advertiser. Capacities are
// outside this problem variant and are not consulted; budget capping happens
// at revenue evaluation.
AllocationLog allocate_ipb(const Instance& inst, const FractionalAssignment& x_star, const Stream& stream, Rng& rng);

// Capacity-only allocator (uses DP accept test, decrements capacity).
AllocationLog allocate_ipc(const Instance& inst, const FractionalAssignment& x_star, const DpTables& dp,
                           const Stream& stream, Rng& rng);

// Budget-and-capacity allocator: same mechanics as allocate_ipc with an
// LP_BC-based solution; revenue evaluation budget-caps per advertiser.
AllocationLog allocate_ipbc(const Instance& inst, const FractionalAssignment& x_star, const DpTables& dp,
                            const Stream& stream, Rng& rng);

// Statistical check of E[min(sum X, C)] >= (1 - e^{-mu/C}) C on sampled sums.
struct MinSumCheck {
  bool satisfied = false;
  double mean = 0;
  double stderr_ = 0;
  double bound = 0;
};
MinSumCheck min_sum_bound_check(const std::vector<double>& sum_samples, double capacity, double mu);

}  // namespace adcell
