#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adcell/knapsack.hpp"
#include "adcell/model.hpp"
#include "adcell/online.hpp"
#include "adcell/rng.hpp"

namespace adcell {

// Per exclusivity group, draws query j with probability p_j and no arrival
// with the residual probability; groups are independent.
Scenario sample_scenario(const Instance& inst, Rng& rng);

// One event per exclusivity group in arrival order.
Stream stream_from_scenario(const Instance& inst, const Scenario& scenario);

enum class McPolicy { Ipb, Ipc, Ipbc, OfflineRound };

std::string policy_name(McPolicy p);
std::optional<McPolicy> policy_from_name(const std::string& name);

// Monte Carlo evaluation summary. Per-trial revenues are computed exactly and
// converted to doubles only for the statistics.
struct McReport {
  std::string policy;
  uint64_t trials = 0;
  uint64_t seed = 0;
  double mean_revenue = 0;
  double std_error = 0;
  // Exact reference: the expectation-LP objective for the online policies,
  // the mean realized-LP objective for offline rounding.
  std::string reference_exact;
  double reference = 0;
  double ratio_to_reference = 0;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// Trial t uses an independent PRNG derived from (seed, t); the reduction over
// trials is sequential in trial order, so reports are bit-identical for a
// given (instance, policy, trials, seed) regardless of the job count.
McReport monte_carlo(const Instance& inst, McPolicy policy, uint64_t trials, uint64_t seed, int jobs = 1,
                     std::vector<double>* per_trial = nullptr);

// Single advertiser with unit budget, n unit bids arriving each with
// probability 1/n: the expectation LP is worth 1 while the expected offline
// optimum is 1 - (1 - 1/n)^n.
Instance gen_integrality_gap(int n);

// Two queries against one capacity-1 customer: an early cheap likely query
// and a late valuable unlikely one. Drives the online/offline gap toward 1/2
// as eps shrinks.
Instance gen_half_tight(const Rat& eps);

struct RandomInstanceParams {
  int num_advertisers = 2;
  int num_queries = 6;
  int num_customers = 2;
  Rat bid_scale = Rat(2);
  Rat budget_scale = Rat(4);
};

// Seeded random instance with bids always at most budgets, capacities in
// [1,3], small-denominator probabilities, exclusivity groups of size 1..3.
Instance gen_random_instance(const RandomInstanceParams& params, uint64_t seed);

// Seeded random knapsack instance; when force_load_ok, probabilities are
// scaled so that sum(p_j) <= capacity.
KnapsackInstance gen_random_knapsack(int max_partitions, int capacity, uint64_t seed, bool force_load_ok = true);

}  // namespace adcell
