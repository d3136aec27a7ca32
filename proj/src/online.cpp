#include "adcell/online.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace adcell {

int DpTables::CustomerTable::partition_of(int64_t time) const {
  auto it = std::lower_bound(times.begin(), times.end(), time);
  if (it == times.end() || *it != time) throw InternalError("query time missing from customer partition list");
  return static_cast<int>(it - times.begin()) + 1;
}

namespace {

void check_masses(const Instance& inst, const FractionalAssignment& x_star) {
  std::vector<Rat> mass(inst.num_queries(), Rat(0));
  for (const auto& [key, v] : x_star.values) {
    if (v < 0) throw StructuralError("negative fractional mass");
    mass[key.second] += v;
  }
  for (int j = 0; j < inst.num_queries(); ++j) {
    if (mass[j] > inst.queries[j].prob)
      throw StructuralError("infeasible LP solution: query " + std::to_string(j) + " mass " +
                            rational_to_string(mass[j]) + " exceeds arrival probability " +
                            rational_to_string(inst.queries[j].prob));
  }
}

}  // namespace

DpTables build_dp_tables(const Instance& inst, const FractionalAssignment& x_star) {
  check_masses(inst, x_star);
  DpTables tables;
  tables.per_customer.resize(inst.num_customers());

  // Pair (mass, value) lists per group, grouped by customer in time order.
  const auto groups = exclusivity_groups(inst);
  std::vector<std::vector<std::vector<std::pair<Rat, Rat>>>> items(inst.num_customers());
  for (const auto& group : groups) {
    const int k = inst.queries[group.front()].customer;
    tables.per_customer[k].times.push_back(inst.queries[group.front()].time);
    std::vector<std::pair<Rat, Rat>> part;
    for (int j : group) {
      for (const auto& [i, u] : inst.queries[j].bids) {
        const Rat mass = x_star.at(i, j);
        if (mass != 0) part.push_back({mass, u});
      }
    }
    items[k].push_back(std::move(part));
  }

  for (int k = 0; k < inst.num_customers(); ++k) {
    auto& table = tables.per_customer[k];
    const int u = static_cast<int>(table.times.size());
    const int cap = inst.customers[k].capacity;
    table.value_to_go.assign(u + 2, std::vector<Rat>(cap + 1, Rat(0)));
    for (int t = u; t >= 1; --t) {
      const auto& next = table.value_to_go[t + 1];
      Rat part_mass(0);
      for (const auto& [mass, value] : items[k][t - 1]) part_mass += mass;
      for (int r = 1; r <= cap; ++r) {
        Rat v = (1 - part_mass) * next[r];
        for (const auto& [mass, value] : items[k][t - 1]) v += mass * std::max(Rat(value + next[r - 1]), next[r]);
        table.value_to_go[t][r] = v;
      }
    }
  }
  return tables;
}

OnlinePolicy build_online_policy(const Instance& inst, const FractionalAssignment& x_star, bool with_dp) {
  check_masses(inst, x_star);
  OnlinePolicy policy;
  policy.inst = &inst;
  policy.use_dp = with_dp;
  policy.draw_advertisers.resize(inst.num_queries());
  policy.draw_cum.resize(inst.num_queries());
  for (int j = 0; j < inst.num_queries(); ++j) {
    const Rat& p = inst.queries[j].prob;
    if (p == 0) continue;
    Rat cum(0);
    for (const auto& [i, u] : inst.queries[j].bids) {
      const Rat mass = x_star.at(i, j);
      if (mass == 0) continue;
      cum += mass / p;
      policy.draw_advertisers[j].push_back(i);
      policy.draw_cum[j].push_back(cum);
    }
  }
  if (with_dp) policy.dp = build_dp_tables(inst, x_star);
  return policy;
}

AllocationLog run_online_policy(const OnlinePolicy& policy, const Stream& stream, Rng& rng) {
  const Instance& inst = *policy.inst;
  AllocationLog log;
  log.spend.assign(inst.num_advertisers(), Rat(0));
  log.usage.assign(inst.num_customers(), 0);
  std::vector<int> remaining(inst.num_customers());
  for (int k = 0; k < inst.num_customers(); ++k) remaining[k] = inst.customers[k].capacity;

  for (const StreamEvent& ev : stream) {
    Decision d;
    d.group = ev.group;
    if (!ev.arrived) {
      d.kind = DecisionKind::NoArrival;
      log.decisions.push_back(d);
      continue;
    }
    const int j = *ev.arrived;
    d.query = j;
    const size_t pick = rng.draw_index(policy.draw_cum[j]);
    if (pick >= policy.draw_advertisers[j].size()) {
      d.kind = DecisionKind::Discarded;
      log.decisions.push_back(d);
      continue;
    }
    const int i = policy.draw_advertisers[j][pick];
    bool accept = true;
    const int k = inst.queries[j].customer;
    if (policy.use_dp) {
      const auto& table = policy.dp.per_customer[k];
      const int t = table.partition_of(inst.queries[j].time);
      const int r = remaining[k];
      accept = r >= 1 && Rat(inst.bid(i, j) + table.value_to_go[t + 1][r - 1]) >= table.value_to_go[t + 1][r];
      if (accept) remaining[k] -= 1;
    }
    if (accept) {
      d.kind = DecisionKind::Allocated;
      d.advertiser = i;
      log.spend[i] += inst.bid(i, j);
      log.usage[k] += 1;
    } else {
      d.kind = DecisionKind::Discarded;
    }
    log.decisions.push_back(d);
  }
  return log;
}

AllocationLog allocate_ipb(const Instance& inst, const FractionalAssignment& x_star, const Stream& stream, Rng& rng) {
  return run_online_policy(build_online_policy(inst, x_star, false), stream, rng);
}

AllocationLog allocate_ipc(const Instance& inst, const FractionalAssignment& x_star, const DpTables& dp,
                           const Stream& stream, Rng& rng) {
  OnlinePolicy policy = build_online_policy(inst, x_star, false);
  policy.dp = dp;
  policy.use_dp = true;
  return run_online_policy(policy, stream, rng);
}

AllocationLog allocate_ipbc(const Instance& inst, const FractionalAssignment& x_star, const DpTables& dp,
                            const Stream& stream, Rng& rng) {
  return allocate_ipc(inst, x_star, dp, stream, rng);
}

Rat capped_revenue(const Instance& inst, const AllocationLog& log) {
  Rat total(0);
  for (int i = 0; i < inst.num_advertisers(); ++i) total += std::min(log.spend[i], inst.advertisers[i].budget);
  return total;
}

Rat uncapped_revenue(const AllocationLog& log) {
  Rat total(0);
  for (const Rat& s : log.spend) total += s;
  return total;
}

MinSumCheck min_sum_bound_check(const std::vector<double>& sum_samples, double capacity, double mu) {
  MinSumCheck check;
  const size_t n = sum_samples.size();
  if (n < 2) throw StructuralError("min_sum_bound_check needs at least 2 samples");
  double sum = 0, sumsq = 0;
  for (double s : sum_samples) {
    const double v = std::min(s, capacity);
    sum += v;
    sumsq += v * v;
  }
  check.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, (sumsq - sum * check.mean) / static_cast<double>(n - 1));
  check.stderr_ = std::sqrt(var / static_cast<double>(n));
  check.bound = (1.0 - std::exp(-mu / capacity)) * capacity;
  check.satisfied = check.mean >= check.bound - 3.0 * check.stderr_;
  return check;
}

}  // namespace adcell
