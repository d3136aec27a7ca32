#pragma once

#include <cstdint>
#include <vector>

#include "adcell/model.hpp"
#include "adcell/rational.hpp"

namespace adcell {

struct KnapsackItem {
  Rat value;
  Rat prob;
  int64_t time = 0;  // items sharing a time form one mutually exclusive partition
};

// Unit-size items arriving stochastically against an integer capacity.
struct KnapsackInstance {
  int capacity = 0;
  std::vector<KnapsackItem> items;

  // Distinct arrival times sorted ascending; partition t (1-based) holds the
  // items with the t-th smallest time.
  std::vector<int64_t> partition_times() const;
  std::vector<std::vector<int>> partitions() const;
};

// Capacity tables are dense; customer ad quotas are small by nature, so a
// hard cap keeps accidental huge capacities from allocating gigabytes.
inline constexpr int kDefaultCapacityLimit = 64;

// value_to_go[t][r] = expected revenue from partitions t.. with r slots left,
// for t in [1, u+1], r in [0, C]. value_to_go[u+1][*] = 0, [*][0] = 0.
struct KnapsackPolicy {
  std::vector<std::vector<Rat>> value_to_go;

  int num_partitions() const { return static_cast<int>(value_to_go.size()) - 2; }
  int capacity() const { return value_to_go.empty() ? 0 : static_cast<int>(value_to_go[0].size()) - 1; }
  const Rat& at(int t, int r) const { return value_to_go[t][r]; }
};

// Backward induction, exact rationals. Throws StructuralError when a
// partition's probabilities sum above 1 or the capacity exceeds the limit.
KnapsackPolicy knapsack_dp(const KnapsackInstance& ki, int capacity_limit = kDefaultCapacityLimit);

// Take if value + value_to_go[t+1][r-1] >= value_to_go[t+1][r]; ties take.
// Never takes with r = 0.
bool knapsack_decide(const KnapsackPolicy& policy, int t, int r, const Rat& value);

// sum(p_j * v_j): the offline expectation proxy.
Rat knapsack_oe(const KnapsackInstance& ki);

// Expected value of the optimal online policy, value_to_go[1][C]. When
// sum(p_j) <= C this is guaranteed to lie in [oe/2, oe].
struct KnapsackOnlineValue {
  Rat value;
  bool load_precondition_held;  // sum(p_j) <= C; the half bound lapses otherwise
};
KnapsackOnlineValue knapsack_expected_online(const KnapsackInstance& ki,
                                             int capacity_limit = kDefaultCapacityLimit);

}  // namespace adcell
