#include <doctest.h>

#include <functional>
#include <map>
#include <set>

#include "adcell/harness.hpp"
#include "adcell/lp.hpp"
#include "adcell/rounding.hpp"

using namespace adcell;

namespace {

Instance instance_2x2(const Rat& b00, const Rat& b01, const Rat& b10, const Rat& b11, const Rat& budget,
                      int capacity = 4) {
  // Two advertisers, two queries on one customer.
  Instance inst;
  inst.advertisers.push_back({budget});
  inst.advertisers.push_back({budget});
  inst.customers.push_back({capacity});
  Query q0;
  q0.customer = 0;
  q0.time = 1;
  q0.prob = 1;
  if (b00 != 0) q0.bids[0] = b00;
  if (b10 != 0) q0.bids[1] = b10;
  inst.queries.push_back(q0);
  Query q1;
  q1.customer = 0;
  q1.time = 2;
  q1.prob = 1;
  if (b01 != 0) q1.bids[0] = b01;
  if (b11 != 0) q1.bids[1] = b11;
  inst.queries.push_back(q1);
  return inst;
}

Scenario all_arrived(const Instance& inst) {
  Scenario s;
  s.arrived.assign(inst.num_queries(), 1);
  return s;
}

bool support_has_cycle(const FractionalAssignment& y, const Instance& inst) {
  // Union-find over advertiser/query nodes restricted to fractional values.
  const int m = inst.num_advertisers();
  std::vector<int> parent(m + inst.num_queries());
  for (size_t v = 0; v < parent.size(); ++v) parent[v] = static_cast<int>(v);
  std::function<int(int)> find = [&](int v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
  for (const auto& [key, val] : y.values) {
    if (val == 0 || val == 1) continue;
    const int a = find(key.first), q = find(m + key.second);
    if (a == q) return true;
    parent[a] = q;
  }
  return false;
}

std::vector<Rat> fractional_spend(const Instance& inst, const FractionalAssignment& y) {
  std::vector<Rat> spend(inst.num_advertisers(), Rat(0));
  for (const auto& [key, v] : y.values) spend[key.first] += v * inst.bid(key.first, key.second);
  return spend;
}

}  // namespace

TEST_CASE("approx_ratio_bound formula and precondition") {
  Instance unit = instance_2x2(Rat(1), Rat(1), Rat(1), Rat(1), Rat(1));
  CHECK(approx_ratio_bound(unit) == Rat(3, 4));  // all bids equal budgets

  Instance small = instance_2x2(Rat(1, 10), Rat(1, 10), Rat(1, 10), Rat(1, 10), Rat(1));
  CHECK(approx_ratio_bound(small) == Rat(39, 40));

  Instance mixed;
  mixed.advertisers.push_back({Rat(4)});
  mixed.customers.push_back({2});
  for (int j = 0; j < 2; ++j) {
    Query q;
    q.customer = 0;
    q.time = j + 1;
    q.prob = 1;
    q.bids[0] = Rat(j + 1);  // bids 1 and 2 against budget 4
    mixed.queries.push_back(q);
  }
  CHECK(approx_ratio_bound(mixed) == Rat(7, 8));

  Instance bad = instance_2x2(Rat(2), Rat(1), Rat(1), Rat(1), Rat(1));
  CHECK_THROWS_AS(approx_ratio_bound(bad), StructuralError);
}

TEST_CASE("rand_move: symmetric pair resolves to a unit vector") {
  Subsystem sub;
  sub.num_vars = 2;
  sub.equalities.push_back({{Rat(1), Rat(1)}, Rat(1)});
  int saw_10 = 0, saw_01 = 0;
  for (uint64_t seed = 0; seed < 64; ++seed) {
    Rng rng(seed);
    RandMoveStep info;
    const auto out = rand_move(sub, {Rat(1, 2), Rat(1, 2)}, rng, &info);
    CHECK(info.alpha == Rat(1, 2));
    CHECK(info.beta == Rat(1, 2));
    CHECK(info.prob_plus == Rat(1, 2));
    CHECK(out[0] + out[1] == Rat(1));
    if (out[0] == 1 && out[1] == 0) ++saw_10;
    else if (out[0] == 0 && out[1] == 1) ++saw_01;
    else FAIL("unexpected rand_move outcome");
  }
  CHECK(saw_10 > 10);
  CHECK(saw_01 > 10);
}

TEST_CASE("rand_move: guard caps the step at x1 = 1/2") {
  Subsystem sub;
  sub.num_vars = 2;
  sub.equalities.push_back({{Rat(1), Rat(1)}, Rat(1)});
  sub.guards.push_back({{Rat(2), Rat(1)}, Rat(3, 2)});
  std::set<std::pair<std::string, std::string>> outcomes;
  for (uint64_t seed = 0; seed < 32; ++seed) {
    Rng rng(seed);
    RandMoveStep info;
    const auto out = rand_move(sub, {Rat(1, 4), Rat(3, 4)}, rng, &info);
    CHECK(info.alpha + info.beta == Rat(1, 2));  // quarter step each way
    outcomes.insert({rational_to_string(out[0]), rational_to_string(out[1])});
    // The branch that raises x1 must stop where the guard becomes tight.
    if (out[0] > Rat(1, 4)) {
      CHECK(out[0] == Rat(1, 2));
      CHECK(2 * out[0] + out[1] == Rat(3, 2));
    } else {
      CHECK(out[0] == Rat(0));
      CHECK(out[1] == Rat(1));
    }
  }
  CHECK(outcomes.size() == 2);
}

TEST_CASE("rand_move: three variables, one row, a null direction exists") {
  Subsystem sub;
  sub.num_vars = 3;
  sub.equalities.push_back({{Rat(1), Rat(1), Rat(1)}, Rat(3, 2)});
  Rng rng(7);
  const auto out = rand_move(sub, {Rat(1, 2), Rat(1, 2), Rat(1, 2)}, rng);
  Rat sum(0);
  int at_bound = 0;
  for (const auto& v : out) {
    sum += v;
    CHECK(v >= 0);
    CHECK(v <= 1);
    if (v == 0 || v == 1) ++at_bound;
  }
  CHECK(sum == Rat(3, 2));
  CHECK(at_bound >= 1);
}

TEST_CASE("rand_move rejects fully determined systems") {
  Subsystem sub;
  sub.num_vars = 2;
  sub.equalities.push_back({{Rat(1), Rat(0)}, Rat(1, 2)});
  sub.equalities.push_back({{Rat(0), Rat(1)}, Rat(1, 2)});
  Rng rng(1);
  CHECK_THROWS_AS(rand_move(sub, {Rat(1, 2), Rat(1, 2)}, rng), InternalError);
}

TEST_CASE("rand_move preserves expectations empirically") {
  Subsystem sub;
  sub.num_vars = 2;
  sub.equalities.push_back({{Rat(2), Rat(1)}, Rat(3, 2)});  // asymmetric row
  Rat sum0(0), sum1(0);
  const int runs = 4000;
  for (int t = 0; t < runs; ++t) {
    Rng rng(derive_seed(99, t));
    const auto out = rand_move(sub, {Rat(1, 2), Rat(1, 2)}, rng);
    sum0 += out[0];
    sum1 += out[1];
  }
  CHECK(std::abs(to_double(sum0) / runs - 0.5) < 0.03);
  CHECK(std::abs(to_double(sum1) / runs - 0.5) < 0.06);
}

TEST_CASE("forestify: forests pass through unchanged") {
  const Instance inst = instance_2x2(Rat(1), Rat(1), Rat(0), Rat(1), Rat(10));
  FractionalAssignment y;
  y.set(0, 0, Rat(1, 3));
  y.set(0, 1, Rat(1, 4));
  y.set(1, 1, Rat(1, 5));
  const FractionalAssignment out = forestify(inst, y);
  CHECK(out.values == y.values);
}

TEST_CASE("forestify: symmetric four-cycle breaks exactly") {
  const Instance inst = instance_2x2(Rat(1), Rat(1), Rat(1), Rat(1), Rat(10));
  FractionalAssignment y;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) y.set(i, j, Rat(1, 2));
  const Rat before = fractional_revenue(inst, y);
  const FractionalAssignment out = forestify(inst, y);
  CHECK(fractional_revenue(inst, out) == before);
  CHECK(before == Rat(2));
  CHECK_FALSE(support_has_cycle(out, inst));
  // Pair sums at each query survive the rotation.
  CHECK(out.at(0, 0) + out.at(1, 0) == Rat(1));
  CHECK(out.at(0, 1) + out.at(1, 1) == Rat(1));
}

TEST_CASE("forestify: unequal bids force the reverse traversal") {
  // bid(0,0) = 2 dominates the product ratio of the rest (all 1).
  const Instance inst = instance_2x2(Rat(2), Rat(1), Rat(1), Rat(1), Rat(10));
  FractionalAssignment y;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) y.set(i, j, Rat(1, 2));
  const Rat before = fractional_revenue(inst, y);
  const auto spend_before = fractional_spend(inst, y);
  const FractionalAssignment out = forestify(inst, y);
  CHECK(fractional_revenue(inst, out) == before);
  CHECK_FALSE(support_has_cycle(out, inst));
  const auto spend_after = fractional_spend(inst, out);
  for (int i = 0; i < 2; ++i) CHECK(spend_before[i] == spend_after[i]);
  // Query totals may only drop.
  CHECK(out.at(0, 0) + out.at(1, 0) <= Rat(1));
  CHECK(out.at(0, 1) + out.at(1, 1) <= Rat(1));
}

TEST_CASE("forestify preserves objective on random cyclic fractional solutions") {
  int cyclic_seen = 0;
  for (uint64_t seed = 0; seed < 40; ++seed) {
    RandomInstanceParams params;
    params.num_advertisers = 3;
    params.num_queries = 5;
    params.num_customers = 2;
    const Instance inst = gen_random_instance(params, seed);
    // A feasible fractional point: y = prob/(3m) on every positive bid keeps
    // all rows slack; dense bid blocks make cycles common.
    FractionalAssignment y;
    for (int j = 0; j < inst.num_queries(); ++j)
      for (const auto& [i, u] : inst.queries[j].bids) y.set(i, j, inst.queries[j].prob / (3 * inst.num_advertisers()));
    if (support_has_cycle(y, inst)) ++cyclic_seen;
    const Rat before = fractional_revenue(inst, y);
    const auto spend_before = fractional_spend(inst, y);
    const FractionalAssignment out = forestify(inst, y);
    CHECK(fractional_revenue(inst, out) == before);
    CHECK_FALSE(support_has_cycle(out, inst));
    const auto spend_after = fractional_spend(inst, out);
    for (int i = 0; i < inst.num_advertisers(); ++i) CHECK(spend_before[i] == spend_after[i]);
  }
  CHECK(cyclic_seen > 10);  // the generator must actually exercise cycles
}

TEST_CASE("round_offline: integral input returns unchanged with empty trace") {
  const Instance inst = instance_2x2(Rat(1), Rat(1), Rat(0), Rat(1), Rat(10));
  const Scenario s = all_arrived(inst);
  FractionalAssignment y;
  y.set(0, 0, Rat(1));
  y.set(1, 1, Rat(1));
  Rng rng(3);
  const RoundingResult res = round_offline(inst, s, y, rng);
  CHECK(res.trace.steps.empty());
  REQUIRE(res.assignment.advertiser_of.size() == 2);
  CHECK(res.assignment.advertiser_of.at(0) == 0);
  CHECK(res.assignment.advertiser_of.at(1) == 1);
}

TEST_CASE("round_offline: two-advertiser shared query path") {
  Instance inst;
  inst.advertisers.push_back({Rat(10)});
  inst.advertisers.push_back({Rat(10)});
  inst.customers.push_back({3});
  Query q;
  q.customer = 0;
  q.time = 1;
  q.prob = 1;
  q.bids[0] = 1;
  q.bids[1] = 1;
  inst.queries.push_back(q);
  const Scenario s = all_arrived(inst);
  FractionalAssignment y;
  y.set(0, 0, Rat(1, 2));
  y.set(1, 0, Rat(1, 2));
  int to_first = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    RoundingOptions opts;
    opts.check_each_step = true;
    const RoundingResult res = round_offline(inst, s, y, rng, opts);
    REQUIRE(res.assignment.advertiser_of.size() == 1);
    REQUIRE(res.trace.steps.size() == 1);
    CHECK(res.trace.steps[0].label == "case-i");
    if (res.assignment.advertiser_of.at(0) == 0) ++to_first;
  }
  CHECK(to_first > 10);
  CHECK(to_first < 40);
}

TEST_CASE("round_offline: two trees joined through one tight set") {
  // Two single-edge trees whose queries share a capacity-1 customer; the
  // engine must chain them and keep the capacity exactly at 1.
  Instance inst;
  inst.advertisers.push_back({Rat(10)});
  inst.advertisers.push_back({Rat(10)});
  inst.customers.push_back({1});
  Query q0;
  q0.customer = 0;
  q0.time = 1;
  q0.prob = 1;
  q0.bids[0] = 1;
  inst.queries.push_back(q0);
  Query q1;
  q1.customer = 0;
  q1.time = 2;
  q1.prob = 1;
  q1.bids[1] = 1;
  inst.queries.push_back(q1);
  const Scenario s = all_arrived(inst);
  FractionalAssignment y;
  y.set(0, 0, Rat(1, 2));
  y.set(1, 1, Rat(1, 2));
  int q0_won = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    RoundingOptions opts;
    opts.check_each_step = true;
    const RoundingResult res = round_offline(inst, s, y, rng, opts);
    REQUIRE(res.assignment.advertiser_of.size() == 1);  // capacity 1 exactly preserved
    REQUIRE(res.trace.steps.size() == 1);
    CHECK(res.trace.steps[0].label == "subcase-5:case-i");
    if (res.assignment.advertiser_of.count(0)) ++q0_won;
  }
  CHECK(q0_won > 10);
  CHECK(q0_won < 40);
}

TEST_CASE("round_offline handles random realized optima without violations") {
  int nontrivial = 0;
  for (uint64_t seed = 0; seed < 60; ++seed) {
    RandomInstanceParams params;
    params.num_advertisers = 2 + static_cast<int>(seed % 2);
    params.num_queries = 5;
    params.num_customers = 2;
    params.bid_scale = 3;
    params.budget_scale = 2;  // binding budgets make fractional optima common
    const Instance inst = gen_random_instance(params, seed);
    Rng scen_rng(derive_seed(seed, 1));
    const Scenario s = sample_scenario(inst, scen_rng);
    const LinearProgram lp = build_lp(inst, LpVariant::BC, s);
    const LpSolution sol = solve_lp(lp);
    const FractionalAssignment y = solution_to_assignment(lp, sol);
    bool fractional = false;
    for (const auto& [k, v] : y.values) fractional |= (v != 0 && v != 1);
    nontrivial += fractional ? 1 : 0;
    for (uint64_t round_seed = 0; round_seed < 5; ++round_seed) {
      Rng rng(derive_seed(seed, 100 + round_seed));
      RoundingOptions opts;
      opts.check_each_step = true;
      const RoundingResult res = round_offline(inst, s, y, rng, opts);
      check_assignment(inst, res.assignment, &s);
      // Every fixed edge appears exactly once across the trace.
      std::set<std::pair<int, int>> fixed;
      for (const auto& step : res.trace.steps)
        for (const auto& [edge, value] : step.fixed) CHECK(fixed.insert(edge).second);
    }
  }
  CHECK(nontrivial > 5);  // the corpus must actually exercise the case engine
}

TEST_CASE("round_offline martingale: mean uncapped payment matches fractional payment") {
  const Instance inst = instance_2x2(Rat(2), Rat(1), Rat(1), Rat(2), Rat(2), /*capacity=*/1);
  const Scenario s = all_arrived(inst);
  const LinearProgram lp = build_lp(inst, LpVariant::BC, s);
  const LpSolution sol = solve_lp(lp);
  const FractionalAssignment y = solution_to_assignment(lp, sol);
  const auto target = fractional_spend(inst, y);
  const int runs = 3000;
  std::vector<Rat> sums(inst.num_advertisers(), Rat(0));
  std::vector<double> sumsq(inst.num_advertisers(), 0.0);
  for (int t = 0; t < runs; ++t) {
    Rng rng(derive_seed(42, t));
    RoundingOptions opts;
    opts.record_trace = false;
    const RoundingResult res = round_offline(inst, s, y, rng, opts);
    const auto spend = assignment_spend(inst, res.assignment);
    for (int i = 0; i < inst.num_advertisers(); ++i) {
      sums[i] += spend[i];
      sumsq[i] += to_double(spend[i]) * to_double(spend[i]);
    }
  }
  for (int i = 0; i < inst.num_advertisers(); ++i) {
    const double mean = to_double(sums[i]) / runs;
    const double var = std::max(0.0, sumsq[i] / runs - mean * mean);
    const double se = std::sqrt(var / runs);
    if (se == 0) {
      CHECK(sums[i] == Rat(runs) * target[i]);
    } else {
      CHECK(std::abs(mean - to_double(target[i])) <= 4 * se);
    }
  }
}

TEST_CASE("round_offline rejects infeasible fractional input") {
  const Instance inst = instance_2x2(Rat(1), Rat(1), Rat(1), Rat(1), Rat(1));
  const Scenario s = all_arrived(inst);
  FractionalAssignment y;
  y.set(0, 0, Rat(3, 4));
  y.set(1, 0, Rat(3, 4));  // assign row above 1
  Rng rng(0);
  CHECK_THROWS_AS(round_offline(inst, s, y, rng), StructuralError);
  FractionalAssignment on_absent;
  on_absent.set(0, 0, Rat(1, 2));
  Scenario none;
  none.arrived.assign(inst.num_queries(), 0);
  CHECK_THROWS_AS(round_offline(inst, none, on_absent, rng), StructuralError);
}

TEST_CASE("rounding trace serializes as JSON lines") {
  Instance inst;
  inst.advertisers.push_back({Rat(10)});
  inst.advertisers.push_back({Rat(10)});
  inst.customers.push_back({3});
  Query q;
  q.customer = 0;
  q.time = 1;
  q.prob = 1;
  q.bids[0] = 1;
  q.bids[1] = 1;
  inst.queries.push_back(q);
  FractionalAssignment y;
  y.set(0, 0, Rat(1, 2));
  y.set(1, 0, Rat(1, 2));
  Rng rng(5);
  const RoundingResult res = round_offline(inst, all_arrived(inst), y, rng);
  const std::string jsonl = res.trace.to_jsonl();
  CHECK(jsonl.find("\"label\":\"case-i\"") != std::string::npos);
  CHECK(jsonl.find("\"alpha\":\"1/2\"") != std::string::npos);
}
