#include "adcell/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adcell/lp.hpp"
#include "adcell/rounding.hpp"

namespace adcell {

Scenario sample_scenario(const Instance& inst, Rng& rng) {
  const auto groups = exclusivity_groups(inst);
  Scenario s;
  s.arrived.assign(inst.num_queries(), 0);
  for (const auto& group : groups) {
    if (group_probability(inst, group) > 1)
      throw StructuralError("exclusivity group probabilities sum above 1");
    std::vector<Rat> cum;
    Rat acc(0);
    for (int j : group) {
      acc += inst.queries[j].prob;
      cum.push_back(acc);
    }
    const size_t pick = rng.draw_index(cum);
    if (pick < group.size()) s.arrived[group[pick]] = 1;
  }
  return s;
}

Stream stream_from_scenario(const Instance& inst, const Scenario& scenario) {
  const auto groups = exclusivity_groups(inst);
  Stream stream;
  for (size_t g = 0; g < groups.size(); ++g) {
    StreamEvent ev;
    ev.group = static_cast<int>(g);
    ev.time = inst.queries[groups[g].front()].time;
    for (int j : groups[g])
      if (scenario.has(j)) ev.arrived = j;
    stream.push_back(ev);
  }
  return stream;
}

std::string policy_name(McPolicy p) {
  switch (p) {
    case McPolicy::Ipb: return "ipb";
    case McPolicy::Ipc: return "ipc";
    case McPolicy::Ipbc: return "ipbc";
    case McPolicy::OfflineRound: return "offline-round";
  }
  return "?";
}

std::optional<McPolicy> policy_from_name(const std::string& name) {
  if (name == "ipb") return McPolicy::Ipb;
  if (name == "ipc") return McPolicy::Ipc;
  if (name == "ipbc") return McPolicy::Ipbc;
  if (name == "offline-round" || name == "offline_round") return McPolicy::OfflineRound;
  return std::nullopt;
}

namespace {

struct TrialOutcome {
  double revenue = 0;
  double reference = 0;  // per-trial realized-LP objective (offline rounding only)
};

}  // namespace

McReport monte_carlo(const Instance& inst, McPolicy policy, uint64_t trials, uint64_t seed, int jobs,
                     std::vector<double>* per_trial) {
  if (trials < 100) throw StructuralError("monte_carlo requires at least 100 trials");
  McReport report;
  report.policy = policy_name(policy);
  report.trials = trials;
  report.seed = seed;

  OnlinePolicy online;
  Rat exact_reference(0);
  const bool is_online = policy != McPolicy::OfflineRound;
  if (is_online) {
    const LpVariant variant = policy == McPolicy::Ipb   ? LpVariant::B
                              : policy == McPolicy::Ipc ? LpVariant::C
                                                        : LpVariant::BC;
    const LinearProgram lp = build_lp(inst, variant);
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) throw StructuralError("expectation LP did not solve to optimality");
    exact_reference = sol.objective_value;
    online = build_online_policy(inst, solution_to_assignment(lp, sol), policy != McPolicy::Ipb);
  }

  std::vector<TrialOutcome> outcomes(trials);
  auto run_range = [&](uint64_t begin, uint64_t end) {
    for (uint64_t t = begin; t < end; ++t) {
      Rng rng(derive_seed(seed, t));
      const Scenario scenario = sample_scenario(inst, rng);
      TrialOutcome& out = outcomes[t];
      if (is_online) {
        const AllocationLog log = run_online_policy(online, stream_from_scenario(inst, scenario), rng);
        const Rat revenue = policy == McPolicy::Ipc ? uncapped_revenue(log) : capped_revenue(inst, log);
        out.revenue = to_double(revenue);
      } else {
        const LinearProgram lp = build_lp(inst, LpVariant::BC, scenario);
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::Optimal) throw StructuralError("realized LP did not solve to optimality");
        RoundingOptions opts;
        opts.record_trace = false;
        const RoundingResult rounded =
            round_offline(inst, scenario, solution_to_assignment(lp, sol), rng, opts);
        out.revenue = to_double(integral_revenue(inst, rounded.assignment));
        out.reference = to_double(sol.objective_value);
      }
    }
  };

  if (jobs <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> workers;
    const uint64_t chunk = (trials + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      const uint64_t begin = std::min<uint64_t>(w * chunk, trials);
      const uint64_t end = std::min<uint64_t>(begin + chunk, trials);
      if (begin < end) workers.emplace_back(run_range, begin, end);
    }
    for (auto& th : workers) th.join();
  }

  double sum = 0, sumsq = 0, ref_sum = 0;
  for (const TrialOutcome& out : outcomes) {
    sum += out.revenue;
    sumsq += out.revenue * out.revenue;
    ref_sum += out.reference;
    if (per_trial) per_trial->push_back(out.revenue);
  }
  report.mean_revenue = sum / static_cast<double>(trials);
  const double var = std::max(0.0, (sumsq - sum * report.mean_revenue) / static_cast<double>(trials - 1));
  report.std_error = std::sqrt(var / static_cast<double>(trials));
  if (is_online) {
    report.reference_exact = rational_to_string(exact_reference);
    report.reference = to_double(exact_reference);
  } else {
    report.reference_exact = "";
    report.reference = ref_sum / static_cast<double>(trials);
  }
  report.ratio_to_reference = report.reference > 0 ? report.mean_revenue / report.reference : 0;
  return report;
}

std::string McReport::to_json() const {
  nlohmann::json j;
  j["policy"] = policy;
  j["trials"] = trials;
  j["seed"] = seed;
  j["mean_revenue"] = mean_revenue;
  j["std_error"] = std_error;
  j["reference"] = reference;
  if (!reference_exact.empty()) j["reference_exact"] = reference_exact;
  j["ratio_to_reference"] = ratio_to_reference;
  return j.dump(2);
}

std::string McReport::csv_header() {
  return "policy,trials,seed,mean_revenue,std_error,reference,ratio_to_reference";
}

std::string McReport::to_csv_row() const {
  std::ostringstream out;
  out.precision(12);
  out << policy << "," << trials << "," << seed << "," << mean_revenue << "," << std_error << "," << reference << ","
      << ratio_to_reference;
  return out.str();
}

Instance gen_integrality_gap(int n) {
  if (n < 1) throw StructuralError("gen_integrality_gap requires n >= 1");
  Instance inst;
  inst.advertisers.push_back({Rat(1)});
  inst.customers.push_back({n});
  for (int j = 0; j < n; ++j) {
    Query q;
    q.customer = 0;
    q.time = j + 1;
    q.prob = rat(1, n);
    q.bids[0] = 1;
    inst.queries.push_back(std::move(q));
  }
  return inst;
}

Instance gen_half_tight(const Rat& eps) {
  if (eps <= 0 || eps >= 1) throw StructuralError("gen_half_tight requires eps in (0,1)");
  Instance inst;
  inst.advertisers.push_back({Rat(1 / eps)});  // never caps: 1 + (1-eps)/eps = 1/eps
  inst.customers.push_back({1});
  Query early;
  early.customer = 0;
  early.time = 1;
  early.prob = 1 - eps;
  early.bids[0] = 1;
  inst.queries.push_back(std::move(early));
  Query late;
  late.customer = 0;
  late.time = 2;
  late.prob = eps;
  late.bids[0] = (1 - eps) / eps;
  inst.queries.push_back(std::move(late));
  return inst;
}

Instance gen_random_instance(const RandomInstanceParams& params, uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1057a9ce));
  Instance inst;
  for (int i = 0; i < params.num_advertisers; ++i)
    inst.advertisers.push_back({Rat(params.budget_scale * rat(2 + static_cast<long>(rng.below(7)), 4))});
  for (int k = 0; k < params.num_customers; ++k)
    inst.customers.push_back({1 + static_cast<int>(rng.below(3))});

  std::vector<int64_t> next_time(params.num_customers, 1);
  int remaining = params.num_queries;
  while (remaining > 0) {
    const int size = 1 + static_cast<int>(rng.below(std::min(3, remaining)));
    const int k = static_cast<int>(rng.below(params.num_customers));
    const int64_t time = next_time[k]++;
    // Raw weights over a common denominator keep the group sum at most 1.
    std::vector<long> weights(size);
    long total = 0;
    for (auto& w : weights) {
      w = 1 + static_cast<long>(rng.below(4));
      total += w;
    }
    const long den = total + static_cast<long>(rng.below(3));
    for (int t = 0; t < size; ++t) {
      Query q;
      q.customer = k;
      q.time = time;
      q.prob = rat(weights[t], den);
      for (int i = 0; i < params.num_advertisers; ++i) {
        if (rng.below(3) == 0) continue;  // sparse bids
        const Rat cap = std::min(params.bid_scale, inst.advertisers[i].budget);
        q.bids[i] = cap * rat(1 + static_cast<long>(rng.below(4)), 4);
      }
      if (q.bids.empty()) {
        const int i = static_cast<int>(rng.below(params.num_advertisers));
        q.bids[i] = std::min(params.bid_scale, inst.advertisers[i].budget) * Rat(1, 2);
      }
      inst.queries.push_back(std::move(q));
      --remaining;
    }
  }
  return inst;
}

KnapsackInstance gen_random_knapsack(int max_partitions, int capacity, uint64_t seed, bool force_load_ok) {
  Rng rng(derive_seed(seed, 0x6b6e61));
  KnapsackInstance ki;
  ki.capacity = capacity;
  const int parts = 1 + static_cast<int>(rng.below(max_partitions));
  for (int t = 0; t < parts; ++t) {
    const int size = 1 + static_cast<int>(rng.below(3));
    std::vector<long> weights(size);
    long total = 0;
    for (auto& w : weights) {
      w = 1 + static_cast<long>(rng.below(4));
      total += w;
    }
    const long den = total + static_cast<long>(rng.below(4));
    for (int s = 0; s < size; ++s) {
      KnapsackItem item;
      item.time = t + 1;
      item.prob = rat(weights[s], den);
      item.value = rat(1 + static_cast<long>(rng.below(16)), 1 + static_cast<long>(rng.below(4)));
      ki.items.push_back(std::move(item));
    }
  }
  if (force_load_ok) {
    Rat load(0);
    for (const auto& item : ki.items) load += item.prob;
    if (load > capacity) {
      const Rat scale = Rat(capacity) / load;
      for (auto& item : ki.items) item.prob *= scale;
    }
  }
  return ki;
}

}  // namespace adcell
