#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adcell/rational.hpp"

namespace adcell {

// Thrown when an operation's structural precondition is violated (bad
// assignment, budget overflow in the LP objective, bid over budget, ...).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when an exhaustive oracle would exceed its enumeration guard.
struct SizeGuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Engine self-check failures: a state the algorithm promises is unreachable.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

struct Advertiser {
  Rat budget;
};

struct Query {
  int customer = 0;
  int64_t time = 0;
  Rat prob;                 // arrival probability
  std::map<int, Rat> bids;  // advertiser -> bid; zero bids are not stored
};

struct Customer {
  int capacity = 1;  // max ads deliverable to this customer
};

struct Instance {
  std::vector<Advertiser> advertisers;
  std::vector<Query> queries;
  std::vector<Customer> customers;

  int num_advertisers() const { return static_cast<int>(advertisers.size()); }
  int num_queries() const { return static_cast<int>(queries.size()); }
  int num_customers() const { return static_cast<int>(customers.size()); }

  // Bid of advertiser i on query j; zero when no bid was placed.
  Rat bid(int i, int j) const {
    const auto& bids = queries[j].bids;
    auto it = bids.find(i);
    return it == bids.end() ? Rat(0) : it->second;
  }
};

// Realized arrivals, one flag per query. Within an exclusivity group at most
// one query arrives.
struct Scenario {
  std::vector<uint8_t> arrived;

  bool has(int j) const { return arrived[j] != 0; }
};

// Sparse fractional solution over (advertiser, query) pairs.
struct FractionalAssignment {
  std::map<std::pair<int, int>, Rat> values;

  Rat at(int i, int j) const {
    auto it = values.find({i, j});
    return it == values.end() ? Rat(0) : it->second;
  }
  void set(int i, int j, Rat v) {
    if (v == 0)
      values.erase({i, j});
    else
      values[{i, j}] = std::move(v);
  }
};

// At most one advertiser per query.
struct IntegralAssignment {
  std::map<int, int> advertiser_of;  // query -> advertiser

  std::optional<int> assigned(int j) const {
    auto it = advertiser_of.find(j);
    if (it == advertiser_of.end()) return std::nullopt;
    return it->second;
  }
};

struct ValidationIssue {
  std::string path;
  std::string message;
};
using ValidationReport = std::vector<ValidationIssue>;

// Lists every invariant violation; empty report iff the instance is valid.
ValidationReport validate_instance(const Instance& inst);

// Sum over advertisers of min(assigned bid mass, budget).
Rat integral_revenue(const Instance& inst, const IntegralAssignment& x);

// LP objective sum(y_ij * u_ij); requires every advertiser's budget row to
// hold, which the LP form presumes.
Rat fractional_revenue(const Instance& inst, const FractionalAssignment& y);

// Partition of query indices by (customer, time), ordered by time ascending
// (ties by customer). Queries in one group are mutually exclusive.
std::vector<std::vector<int>> exclusivity_groups(const Instance& inst);

// Total arrival probability of a group (used by samplers and validators).
Rat group_probability(const Instance& inst, const std::vector<int>& group);

// Checks an integral assignment against the instance (positive bid, capacity,
// and optionally arrival under a scenario); throws StructuralError.
void check_assignment(const Instance& inst, const IntegralAssignment& x,
                      const Scenario* scenario = nullptr);

// Per-advertiser bid mass of an assignment, uncapped.
std::vector<Rat> assignment_spend(const Instance& inst, const IntegralAssignment& x);

// --- JSON instance / scenario formats -------------------------------------
//
// {"advertisers":[{"budget":"3/2"}], "customers":[{"capacity":2}],
//  "queries":[{"customer":0,"time":5,"prob":"1/4","bids":{"0":"2","3":"1/2"}}]}
//
// Rationals are accepted as "p/q" strings, decimal strings, or JSON integers.
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& text);
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text, const Instance& inst);
Scenario load_scenario(const std::string& path, const Instance& inst);
void save_scenario(const Scenario& s, const std::string& path);

}  // namespace adcell
