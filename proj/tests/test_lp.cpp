#include <doctest.h>

#include "adcell/harness.hpp"
#include "adcell/lp.hpp"
#include "adcell/oracle.hpp"
#include "adcell/rng.hpp"

using namespace adcell;

namespace {

Instance single_query_instance(const Rat& prob) {
  Instance inst;
  inst.advertisers.push_back({Rat(1)});
  inst.customers.push_back({1});
  Query q;
  q.customer = 0;
  q.time = 1;
  q.prob = prob;
  q.bids[0] = 1;
  inst.queries.push_back(q);
  return inst;
}

// Exhaustive scenario enumeration helper shared by the dominance tests.
template <typename Fn>
void for_each_scenario(const Instance& inst, Fn&& fn) {
  const auto groups = exclusivity_groups(inst);
  std::vector<size_t> choice(groups.size(), 0);
  while (true) {
    Rat prob(1);
    Scenario s;
    s.arrived.assign(inst.num_queries(), 0);
    for (size_t g = 0; g < groups.size(); ++g) {
      if (choice[g] < groups[g].size()) {
        s.arrived[groups[g][choice[g]]] = 1;
        prob *= inst.queries[groups[g][choice[g]]].prob;
      } else {
        prob *= 1 - group_probability(inst, groups[g]);
      }
    }
    fn(s, prob);
    size_t g = 0;
    for (; g < groups.size(); ++g) {
      if (++choice[g] <= groups[g].size()) break;
      choice[g] = 0;
    }
    if (g == groups.size()) break;
  }
}

}  // namespace

TEST_CASE("build_lp: single query expectation variant B") {
  const Instance inst = single_query_instance(Rat(1, 2));
  const LinearProgram lp = build_lp(inst, LpVariant::B);
  CHECK(lp.num_columns() == 1);
  int assign_rows = 0, budget_rows = 0, capacity_rows = 0, bound_rows = 0;
  for (const auto& row : lp.rows) {
    switch (row.kind) {
      case RowKind::Assign:
        ++assign_rows;
        CHECK(row.rhs == Rat(1, 2));
        break;
      case RowKind::Budget:
        ++budget_rows;
        CHECK(row.rhs == Rat(1));
        break;
      case RowKind::Capacity: ++capacity_rows; break;
      case RowKind::UpperBound: ++bound_rows; break;
    }
  }
  CHECK(assign_rows == 1);
  CHECK(budget_rows == 1);
  CHECK(capacity_rows == 0);
  CHECK(bound_rows == 1);
}

TEST_CASE("build_lp: integrality gap instance rows") {
  const Instance inst = gen_integrality_gap(4);
  const LinearProgram lp = build_lp(inst, LpVariant::B);
  CHECK(lp.num_columns() == 4);
  int assign_rows = 0, budget_rows = 0;
  for (const auto& row : lp.rows) {
    if (row.kind == RowKind::Assign) {
      ++assign_rows;
      CHECK(row.rhs == Rat(1, 4));
    }
    if (row.kind == RowKind::Budget) {
      ++budget_rows;
      CHECK(row.rhs == Rat(1));
    }
  }
  CHECK(assign_rows == 4);
  CHECK(budget_rows == 1);
}

TEST_CASE("build_lp: realized mode zeroes absent queries") {
  const Instance inst = gen_integrality_gap(2);
  Scenario s;
  s.arrived = {1, 0};
  const LinearProgram lp = build_lp(inst, LpVariant::B, s);
  for (const auto& row : lp.rows) {
    if (row.kind != RowKind::Assign) continue;
    CHECK(row.rhs == Rat(row.entity == 0 ? 1 : 0));
  }
}

TEST_CASE("solve_lp: trivial box program") {
  const Instance inst = single_query_instance(Rat(1));
  const LpSolution sol = lp_round_trip(inst, LpVariant::B);
  CHECK(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == Rat(1));
  CHECK(sol.values[0] == Rat(1));
}

TEST_CASE("solve_lp: integrality gap expectation objective is exactly 1") {
  const LpSolution sol = lp_round_trip(gen_integrality_gap(4), LpVariant::B);
  CHECK(sol.objective_value == Rat(1));
}

TEST_CASE("solve_lp: half-tight expectation LP_C objective is 9/5") {
  const LpSolution sol = lp_round_trip(gen_half_tight(Rat(1, 10)), LpVariant::C);
  CHECK(sol.objective_value == Rat(9, 5));
}

TEST_CASE("lp_round_trip: empty instance solves to zero") {
  const LpSolution sol = lp_round_trip(Instance{}, LpVariant::BC);
  CHECK(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == Rat(0));
}

TEST_CASE("lp variants: BC is dominated by B and C") {
  for (uint64_t seed = 1; seed <= 12; ++seed) {
    RandomInstanceParams params;
    params.num_queries = 5;
    const Instance inst = gen_random_instance(params, seed);
    const Rat b = lp_round_trip(inst, LpVariant::B).objective_value;
    const Rat c = lp_round_trip(inst, LpVariant::C).objective_value;
    const Rat bc = lp_round_trip(inst, LpVariant::BC).objective_value;
    CHECK(bc <= b);
    CHECK(bc <= c);
  }
}

TEST_CASE("expectation LP dominates the exact scenario average") {
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    RandomInstanceParams params;
    params.num_queries = 4;
    params.num_advertisers = 2;
    const Instance inst = gen_random_instance(params, seed);
    const Rat expectation_obj = lp_round_trip(inst, LpVariant::BC).objective_value;
    Rat average(0);
    for_each_scenario(inst, [&](const Scenario& s, const Rat& prob) {
      if (prob != 0) average += prob * lp_round_trip(inst, LpVariant::BC, s).objective_value;
    });
    CHECK(average <= expectation_obj);
  }
}

TEST_CASE("realized LP dominates the exact integral optimum") {
  for (uint64_t seed = 20; seed < 30; ++seed) {
    RandomInstanceParams params;
    params.num_advertisers = 2;
    params.num_queries = 3;
    params.num_customers = 1;
    const Instance inst = gen_random_instance(params, seed);
    Rng rng(seed);
    const Scenario s = sample_scenario(inst, rng);
    const Rat lp_obj = lp_round_trip(inst, LpVariant::BC, s).objective_value;
    const OfflineOptimum opt = offline_opt_exact(inst, s);
    CHECK(opt.value <= lp_obj);
  }
}

TEST_CASE("solve_lp reports infeasible systems") {
  // x >= 0 with row x <= -1.
  LinearProgram lp;
  lp.columns.push_back({0, 0});
  lp.column_index[{0, 0}] = 0;
  lp.objective.push_back(Rat(1));
  lp.rows.push_back({RowKind::Assign, 0, {{0, Rat(1)}}, Rat(-1)});
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("solve_lp handles negative rhs via phase one") {
  // maximize x subject to -x <= -1/2, x <= 1: optimum 1 with x >= 1/2 feasible.
  LinearProgram lp;
  lp.columns.push_back({0, 0});
  lp.column_index[{0, 0}] = 0;
  lp.objective.push_back(Rat(1));
  lp.rows.push_back({RowKind::Assign, 0, {{0, Rat(-1)}}, Rat(-1, 2)});
  lp.rows.push_back({RowKind::UpperBound, 0, {{0, Rat(1)}}, Rat(1)});
  const LpSolution sol = solve_lp(lp);
  CHECK(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == Rat(1));
}

TEST_CASE("lp dump mentions every row family") {
  const Instance inst = gen_half_tight(Rat(1, 10));
  const std::string dump = dump_lp(build_lp(inst, LpVariant::BC));
  CHECK(dump.find("assign[q0]") != std::string::npos);
  CHECK(dump.find("capacity[c0]") != std::string::npos);
  CHECK(dump.find("budget[a0]") != std::string::npos);
  CHECK(dump.find("maximize:") != std::string::npos);
}
