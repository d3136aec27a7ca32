#include "adcell/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace adcell {

namespace {

constexpr double kOfflineGuard = 1e7;
constexpr double kScenarioGuard = 1e6;
constexpr size_t kStateGuard = 1000000;

struct OfflineSearch {
  const Instance& inst;
  std::vector<int> arrived;       // arrived query indices
  std::vector<int> usage;         // per customer
  std::vector<Rat> spend;         // per advertiser, uncapped
  Rat best_value;
  IntegralAssignment current;
  IntegralAssignment best;

  explicit OfflineSearch(const Instance& i)
      : inst(i), usage(i.num_customers(), 0), spend(i.num_advertisers(), Rat(0)), best_value(0) {}

  Rat capped_total() const {
    Rat total(0);
    for (int i = 0; i < inst.num_advertisers(); ++i) total += std::min(spend[i], inst.advertisers[i].budget);
    return total;
  }

  void recurse(size_t idx) {
    if (idx == arrived.size()) {
      Rat v = capped_total();
      if (v > best_value) {
        best_value = v;
        best = current;
      }
      return;
    }
    const int j = arrived[idx];
    const int k = inst.queries[j].customer;
    recurse(idx + 1);  // discard
    if (usage[k] >= inst.customers[k].capacity) return;
    for (const auto& [i, u] : inst.queries[j].bids) {
      usage[k] += 1;
      spend[i] += u;
      current.advertiser_of[j] = i;
      recurse(idx + 1);
      current.advertiser_of.erase(j);
      spend[i] -= u;
      usage[k] -= 1;
    }
  }
};

}  // namespace

OfflineOptimum offline_opt_exact(const Instance& inst, const Scenario& scenario) {
  OfflineSearch search(inst);
  for (int j = 0; j < inst.num_queries(); ++j)
    if (scenario.has(j)) search.arrived.push_back(j);
  const double combos = std::pow(static_cast<double>(inst.num_advertisers() + 1),
                                 static_cast<double>(search.arrived.size()));
  if (combos > kOfflineGuard)
    throw SizeGuardError("offline enumeration would need ~" + std::to_string(combos) + " assignments");
  search.recurse(0);
  return {search.best_value, search.best};
}

Rat expected_offline_opt_exact(const Instance& inst) {
  const auto groups = exclusivity_groups(inst);
  double scenario_count = 1;
  for (const auto& g : groups) scenario_count *= static_cast<double>(g.size() + 1);
  if (scenario_count > kScenarioGuard)
    throw SizeGuardError("scenario enumeration would need ~" + std::to_string(scenario_count) + " scenarios");

  Rat total(0);
  Scenario scenario;
  scenario.arrived.assign(inst.num_queries(), 0);
  // Outcome index per group: group.size() means "no arrival".
  std::vector<size_t> choice(groups.size(), 0);
  while (true) {
    Rat prob(1);
    std::fill(scenario.arrived.begin(), scenario.arrived.end(), 0);
    for (size_t g = 0; g < groups.size(); ++g) {
      if (choice[g] < groups[g].size()) {
        const int j = groups[g][choice[g]];
        scenario.arrived[j] = 1;
        prob *= inst.queries[j].prob;
      } else {
        prob *= 1 - group_probability(inst, groups[g]);
      }
    }
    if (prob != 0) total += prob * offline_opt_exact(inst, scenario).value;
    // Advance the mixed-radix counter.
    size_t g = 0;
    for (; g < groups.size(); ++g) {
      if (++choice[g] <= groups[g].size()) break;
      choice[g] = 0;
    }
    if (g == groups.size()) break;
  }
  return total;
}

namespace {

struct OnlineState {
  std::vector<int> caps;
  std::vector<Rat> spend;

  bool operator<(const OnlineState& o) const {
    if (caps != o.caps) return caps < o.caps;
    return std::lexicographical_compare(spend.begin(), spend.end(), o.spend.begin(), o.spend.end());
  }
};

class OnlineSolver {
 public:
  explicit OnlineSolver(const Instance& inst) : inst_(inst), groups_(exclusivity_groups(inst)) {
    memo_.resize(groups_.size() + 1);
  }

  Rat solve() {
    OnlineState start;
    for (const auto& c : inst_.customers) start.caps.push_back(c.capacity);
    start.spend.assign(inst_.num_advertisers(), Rat(0));
    return value(0, start);
  }

 private:
  Rat terminal(const OnlineState& s) const {
    Rat total(0);
    for (int i = 0; i < inst_.num_advertisers(); ++i) total += std::min(s.spend[i], inst_.advertisers[i].budget);
    return total;
  }

  Rat value(size_t g, const OnlineState& s) {
    if (g == groups_.size()) return terminal(s);
    auto it = memo_[g].find(s);
    if (it != memo_[g].end()) return it->second;
    states_ += 1;
    if (states_ > kStateGuard) throw SizeGuardError("online oracle exceeded 10^6 states");

    Rat no_arrival = value(g + 1, s);
    Rat result = (1 - group_probability(inst_, groups_[g])) * no_arrival;
    for (int j : groups_[g]) {
      const Rat& p = inst_.queries[j].prob;
      if (p == 0) continue;
      // Arrived: best of discarding or assigning to a bidding advertiser.
      Rat best = no_arrival;
      const int k = inst_.queries[j].customer;
      if (s.caps[k] > 0) {
        for (const auto& [i, u] : inst_.queries[j].bids) {
          OnlineState next = s;
          next.caps[k] -= 1;
          next.spend[i] += u;
          best = std::max(best, value(g + 1, next));
        }
      }
      result += p * best;
    }
    memo_[g].emplace(s, result);
    return memo_[g].at(s);
  }

  const Instance& inst_;
  std::vector<std::vector<int>> groups_;
  std::vector<std::map<OnlineState, Rat>> memo_;
  size_t states_ = 0;
};

}  // namespace

Rat online_opt_exact(const Instance& inst) { return OnlineSolver(inst).solve(); }

}  // namespace adcell
