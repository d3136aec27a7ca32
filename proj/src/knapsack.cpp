#include "adcell/knapsack.hpp"

#include <algorithm>
#include <map>

namespace adcell {

std::vector<int64_t> KnapsackInstance::partition_times() const {
  std::vector<int64_t> times;
  for (const auto& item : items) times.push_back(item.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::vector<std::vector<int>> KnapsackInstance::partitions() const {
  const auto times = partition_times();
  std::map<int64_t, int> index_of;
  for (size_t t = 0; t < times.size(); ++t) index_of[times[t]] = static_cast<int>(t);
  std::vector<std::vector<int>> parts(times.size());
  for (size_t j = 0; j < items.size(); ++j) parts[index_of.at(items[j].time)].push_back(static_cast<int>(j));
  return parts;
}

KnapsackPolicy knapsack_dp(const KnapsackInstance& ki, int capacity_limit) {
  if (ki.capacity < 0) throw StructuralError("knapsack capacity must be >= 0");
  if (ki.capacity > capacity_limit)
    throw StructuralError("knapsack capacity " + std::to_string(ki.capacity) + " exceeds limit " +
                          std::to_string(capacity_limit));
  const auto parts = ki.partitions();
  const int u = static_cast<int>(parts.size());
  const int cap = ki.capacity;

  for (const auto& part : parts) {
    Rat sum(0);
    for (int j : part) {
      if (ki.items[j].prob < 0 || ki.items[j].prob > 1) throw StructuralError("item probability outside [0,1]");
      if (ki.items[j].value < 0) throw StructuralError("item value must be >= 0");
      sum += ki.items[j].prob;
    }
    if (sum > 1) throw StructuralError("partition probabilities sum to " + rational_to_string(sum) + " > 1");
  }

  KnapsackPolicy policy;
  policy.value_to_go.assign(u + 2, std::vector<Rat>(cap + 1, Rat(0)));
  for (int t = u; t >= 1; --t) {
    const auto& next = policy.value_to_go[t + 1];
    Rat part_prob(0);
    for (int j : parts[t - 1]) part_prob += ki.items[j].prob;
    for (int r = 1; r <= cap; ++r) {
      Rat v = (1 - part_prob) * next[r];
      for (int j : parts[t - 1]) v += ki.items[j].prob * std::max(Rat(ki.items[j].value + next[r - 1]), next[r]);
      policy.value_to_go[t][r] = v;
    }
  }
  return policy;
}

bool knapsack_decide(const KnapsackPolicy& policy, int t, int r, const Rat& value) {
  if (r <= 0) return false;
  const auto& next = policy.value_to_go[t + 1];
  return Rat(value + next[r - 1]) >= next[r];
}

Rat knapsack_oe(const KnapsackInstance& ki) {
  Rat total(0);
  for (const auto& item : ki.items) total += item.prob * item.value;
  return total;
}

KnapsackOnlineValue knapsack_expected_online(const KnapsackInstance& ki, int capacity_limit) {
  const auto policy = knapsack_dp(ki, capacity_limit);
  Rat load(0);
  for (const auto& item : ki.items) load += item.prob;
  const int u = policy.num_partitions();
  return {u >= 1 ? policy.value_to_go[1][ki.capacity] : Rat(0), load <= ki.capacity};
}

}  // namespace adcell
