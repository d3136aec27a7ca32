#include <doctest.h>

#include "adcell/model.hpp"
#include "adcell/rational.hpp"

using namespace adcell;

namespace {

Instance minimal_instance() {
  Instance inst;
  inst.advertisers.push_back({Rat(1)});
  inst.customers.push_back({1});
  Query q;
  q.customer = 0;
  q.time = 1;
  q.prob = 1;
  q.bids[0] = 1;
  inst.queries.push_back(q);
  return inst;
}

}  // namespace

TEST_CASE("rational parsing accepts p/q, decimals, and integers") {
  CHECK(parse_rational("3/2") == Rat(3, 2));
  CHECK(parse_rational("2") == Rat(2));
  CHECK(parse_rational("0.25") == Rat(1, 4));
  CHECK(parse_rational("-3.5") == Rat(-7, 2));
  CHECK(rational_to_string(Rat(3, 2)) == "3/2");
  CHECK(rational_to_string(Rat(4)) == "4");
  CHECK_THROWS_AS(parse_rational("1/0"), ParseError);
  CHECK_THROWS_AS(parse_rational("abc"), ParseError);
}

TEST_CASE("validate_instance: minimal valid instance has empty report") {
  CHECK(validate_instance(minimal_instance()).empty());
}

TEST_CASE("validate_instance flags capacity below one") {
  Instance inst = minimal_instance();
  inst.customers[0].capacity = 0;
  const auto report = validate_instance(inst);
  REQUIRE(report.size() == 1);
  CHECK(report[0].path == "customers[0].capacity");
}

TEST_CASE("validate_instance flags group probability overflow") {
  Instance inst = minimal_instance();
  inst.queries[0].prob = Rat(7, 10);
  Query q2 = inst.queries[0];
  q2.prob = Rat(3, 5);
  inst.queries.push_back(q2);
  const auto report = validate_instance(inst);
  REQUIRE(report.size() == 1);
  CHECK(report[0].message.find("13/10") != std::string::npos);
}

TEST_CASE("integral_revenue caps at the budget") {
  Instance inst;
  inst.advertisers.push_back({Rat(5)});
  inst.customers.push_back({2});
  for (int j = 0; j < 2; ++j) {
    Query q;
    q.customer = 0;
    q.time = j + 1;
    q.prob = 1;
    q.bids[0] = j == 0 ? Rat(3) : Rat(4);
    inst.queries.push_back(q);
  }
  IntegralAssignment x;
  x.advertiser_of = {{0, 0}, {1, 0}};
  CHECK(integral_revenue(inst, x) == Rat(5));  // min(7, 5)
  CHECK(integral_revenue(inst, IntegralAssignment{}) == Rat(0));
}

TEST_CASE("integral_revenue: two advertisers, direct evaluation") {
  Instance inst;
  inst.advertisers.push_back({Rat(2)});
  inst.advertisers.push_back({Rat(2)});
  inst.customers.push_back({2});
  Query q1;
  q1.customer = 0;
  q1.time = 1;
  q1.prob = 1;
  q1.bids[0] = 2;
  inst.queries.push_back(q1);
  Query q2;
  q2.customer = 0;
  q2.time = 2;
  q2.prob = 1;
  q2.bids[1] = 1;
  inst.queries.push_back(q2);
  IntegralAssignment x;
  x.advertiser_of = {{0, 0}, {1, 1}};
  CHECK(integral_revenue(inst, x) == Rat(3));
}

TEST_CASE("integral_revenue rejects capacity violations and zero-bid pairs") {
  Instance inst = minimal_instance();
  Query q2 = inst.queries[0];
  q2.time = 2;
  inst.queries.push_back(q2);
  IntegralAssignment both;
  both.advertiser_of = {{0, 0}, {1, 0}};  // capacity is 1
  CHECK_THROWS_AS(integral_revenue(inst, both), StructuralError);
  IntegralAssignment zero_bid;
  zero_bid.advertiser_of = {{0, 0}};
  inst.queries[0].bids.clear();
  CHECK_THROWS_AS(integral_revenue(inst, zero_bid), StructuralError);
}

TEST_CASE("fractional_revenue is linear and guards budget rows") {
  Instance inst = minimal_instance();
  FractionalAssignment y;
  CHECK(fractional_revenue(inst, y) == Rat(0));
  y.set(0, 0, Rat(1, 2));
  CHECK(fractional_revenue(inst, y) == Rat(1, 2));
  // Budget row: 2 * 1 > 1 must throw (value above 1 is also structural).
  y.set(0, 0, Rat(2));
  CHECK_THROWS_AS(fractional_revenue(inst, y), StructuralError);
}

TEST_CASE("exclusivity_groups partitions by (customer, time)") {
  Instance inst;
  inst.advertisers.push_back({Rat(1)});
  inst.customers.push_back({1});
  for (int t : {1, 1, 2}) {
    Query q;
    q.customer = 0;
    q.time = t;
    q.prob = Rat(1, 4);
    q.bids[0] = 1;
    inst.queries.push_back(q);
  }
  const auto groups = exclusivity_groups(inst);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0] == std::vector<int>{0, 1});
  CHECK(groups[1] == std::vector<int>{2});
  CHECK(exclusivity_groups(Instance{}).empty());
}

TEST_CASE("instance JSON round trip") {
  Instance inst;
  inst.advertisers.push_back({Rat(3, 2)});
  inst.customers.push_back({2});
  Query q;
  q.customer = 0;
  q.time = 5;
  q.prob = Rat(1, 4);
  q.bids[0] = Rat(2);
  inst.queries.push_back(q);
  const Instance back = instance_from_json(instance_to_json(inst));
  CHECK(back.advertisers[0].budget == Rat(3, 2));
  CHECK(back.customers[0].capacity == 2);
  CHECK(back.queries[0].prob == Rat(1, 4));
  CHECK(back.queries[0].bids.at(0) == Rat(2));
  CHECK(back.queries[0].time == 5);
}

TEST_CASE("instance JSON drops explicit zero bids") {
  const std::string text = R"({"advertisers":[{"budget":"1"}],"customers":[{"capacity":1}],
    "queries":[{"customer":0,"time":1,"prob":"0.5","bids":{"0":"0"}}]})";
  const Instance inst = instance_from_json(text);
  CHECK(inst.queries[0].bids.empty());
}

TEST_CASE("scenario JSON validates exclusivity") {
  Instance inst;
  inst.advertisers.push_back({Rat(1)});
  inst.customers.push_back({1});
  for (int j = 0; j < 2; ++j) {
    Query q;
    q.customer = 0;
    q.time = 1;
    q.prob = Rat(1, 2);
    q.bids[0] = 1;
    inst.queries.push_back(q);
  }
  CHECK_THROWS_AS(scenario_from_json(R"({"arrived":[true,true]})", inst), ParseError);
  const Scenario ok = scenario_from_json(R"({"arrived":[true,false]})", inst);
  CHECK(ok.has(0));
  CHECK(!ok.has(1));
}

TEST_CASE("integral revenue never exceeds the budget total") {
  Instance inst;
  inst.advertisers.push_back({Rat(2)});
  inst.advertisers.push_back({Rat(3, 2)});
  inst.customers.push_back({3});
  for (int j = 0; j < 3; ++j) {
    Query q;
    q.customer = 0;
    q.time = j;
    q.prob = 1;
    q.bids[0] = Rat(2);
    q.bids[1] = Rat(1);
    inst.queries.push_back(q);
  }
  Rat budget_total = inst.advertisers[0].budget + inst.advertisers[1].budget;
  // Monotonicity: growing assignments never lower revenue.
  IntegralAssignment x;
  Rat last(0);
  for (int j = 0; j < 3; ++j) {
    x.advertiser_of[j] = j % 2;
    const Rat r = integral_revenue(inst, x);
    CHECK(r >= last);
    CHECK(r <= budget_total);
    last = r;
  }
}
