#include "adcell/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace adcell {

using nlohmann::json;

ValidationReport validate_instance(const Instance& inst) {
  ValidationReport report;
  const int m = inst.num_advertisers();
  const int s = inst.num_customers();

  for (int i = 0; i < m; ++i) {
    if (inst.advertisers[i].budget <= 0)
      report.push_back({"advertisers[" + std::to_string(i) + "].budget",
                        "budget must be > 0, got " + rational_to_string(inst.advertisers[i].budget)});
  }
  for (int k = 0; k < s; ++k) {
    if (inst.customers[k].capacity < 1)
      report.push_back({"customers[" + std::to_string(k) + "].capacity",
                        "capacity must be >= 1, got " + std::to_string(inst.customers[k].capacity)});
  }
  for (int j = 0; j < inst.num_queries(); ++j) {
    const Query& q = inst.queries[j];
    const std::string base = "queries[" + std::to_string(j) + "]";
    if (q.customer < 0 || q.customer >= s)
      report.push_back({base + ".customer", "customer index out of range [0," + std::to_string(s) + ")"});
    if (q.prob < 0 || q.prob > 1)
      report.push_back({base + ".prob", "arrival probability must lie in [0,1], got " + rational_to_string(q.prob)});
    for (const auto& [i, u] : q.bids) {
      if (i < 0 || i >= m)
        report.push_back({base + ".bids[" + std::to_string(i) + "]", "advertiser index out of range"});
      if (u < 0)
        report.push_back({base + ".bids[" + std::to_string(i) + "]", "bid must be >= 0"});
    }
  }
  // Mutual exclusivity: probabilities within a (customer, time) group sum to at most 1.
  std::map<std::pair<int, int64_t>, Rat> group_sums;
  for (const Query& q : inst.queries) {
    if (q.customer < 0 || q.customer >= s) continue;
    group_sums[{q.customer, q.time}] += q.prob;
  }
  for (const auto& [key, sum] : group_sums) {
    if (sum > 1)
      report.push_back({"group(customer=" + std::to_string(key.first) + ",time=" + std::to_string(key.second) + ")",
                        "arrival probabilities sum to " + rational_to_string(sum) + " > 1"});
  }
  return report;
}

void check_assignment(const Instance& inst, const IntegralAssignment& x, const Scenario* scenario) {
  std::vector<int> usage(inst.num_customers(), 0);
  for (const auto& [j, i] : x.advertiser_of) {
    if (j < 0 || j >= inst.num_queries())
      throw StructuralError("assignment references unknown query " + std::to_string(j));
    if (i < 0 || i >= inst.num_advertisers())
      throw StructuralError("assignment references unknown advertiser " + std::to_string(i));
    if (inst.bid(i, j) == 0)
      throw StructuralError("query " + std::to_string(j) + " assigned to advertiser " + std::to_string(i) +
                            " which placed no bid");
    if (scenario && !scenario->has(j))
      throw StructuralError("query " + std::to_string(j) + " assigned but did not arrive");
    usage[inst.queries[j].customer] += 1;
  }
  for (int k = 0; k < inst.num_customers(); ++k) {
    if (usage[k] > inst.customers[k].capacity)
      throw StructuralError("customer " + std::to_string(k) + " capacity exceeded: " + std::to_string(usage[k]) +
                            " > " + std::to_string(inst.customers[k].capacity));
  }
}

std::vector<Rat> assignment_spend(const Instance& inst, const IntegralAssignment& x) {
  std::vector<Rat> spend(inst.num_advertisers(), Rat(0));
  for (const auto& [j, i] : x.advertiser_of) spend[i] += inst.bid(i, j);
  return spend;
}

Rat integral_revenue(const Instance& inst, const IntegralAssignment& x) {
  check_assignment(inst, x);
  Rat total(0);
  const auto spend = assignment_spend(inst, x);
  for (int i = 0; i < inst.num_advertisers(); ++i) total += std::min(spend[i], inst.advertisers[i].budget);
  return total;
}

Rat fractional_revenue(const Instance& inst, const FractionalAssignment& y) {
  std::vector<Rat> spend(inst.num_advertisers(), Rat(0));
  for (const auto& [key, v] : y.values) {
    const auto [i, j] = key;
    if (v < 0 || v > 1)
      throw StructuralError("fractional value out of [0,1] at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    spend[i] += v * inst.bid(i, j);
  }
  Rat total(0);
  for (int i = 0; i < inst.num_advertisers(); ++i) {
    if (spend[i] > inst.advertisers[i].budget)
      throw StructuralError("budget row violated for advertiser " + std::to_string(i) + ": " +
                            rational_to_string(spend[i]) + " > " + rational_to_string(inst.advertisers[i].budget));
    total += spend[i];
  }
  return total;
}

std::vector<std::vector<int>> exclusivity_groups(const Instance& inst) {
  std::map<std::pair<int64_t, int>, std::vector<int>> by_key;  // (time, customer) -> queries
  for (int j = 0; j < inst.num_queries(); ++j)
    by_key[{inst.queries[j].time, inst.queries[j].customer}].push_back(j);
  std::vector<std::vector<int>> groups;
  groups.reserve(by_key.size());
  for (auto& [key, g] : by_key) groups.push_back(std::move(g));
  return groups;
}

Rat group_probability(const Instance& inst, const std::vector<int>& group) {
  Rat sum(0);
  for (int j : group) sum += inst.queries[j].prob;
  return sum;
}

// --- JSON ------------------------------------------------------------------

namespace {

Rat rational_from_json(const json& v, const std::string& where) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rat(static_cast<long>(v.get<int64_t>()));
  throw ParseError(where + ": rationals must be strings (\"p/q\" or decimal) or integers");
}

}  // namespace

std::string instance_to_json(const Instance& inst) {
  json root;
  root["advertisers"] = json::array();
  for (const auto& a : inst.advertisers) root["advertisers"].push_back({{"budget", rational_to_string(a.budget)}});
  root["customers"] = json::array();
  for (const auto& c : inst.customers) root["customers"].push_back({{"capacity", c.capacity}});
  root["queries"] = json::array();
  for (const auto& q : inst.queries) {
    json bids = json::object();
    for (const auto& [i, u] : q.bids) bids[std::to_string(i)] = rational_to_string(u);
    root["queries"].push_back({{"customer", q.customer},
                               {"time", q.time},
                               {"prob", rational_to_string(q.prob)},
                               {"bids", std::move(bids)}});
  }
  return root.dump(2);
}

Instance instance_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("instance JSON: ") + e.what());
  }
  Instance inst;
  for (const auto& a : root.at("advertisers"))
    inst.advertisers.push_back({rational_from_json(a.at("budget"), "advertiser budget")});
  for (const auto& c : root.at("customers")) inst.customers.push_back({c.at("capacity").get<int>()});
  for (const auto& qj : root.at("queries")) {
    Query q;
    q.customer = qj.at("customer").get<int>();
    q.time = qj.at("time").get<int64_t>();
    q.prob = rational_from_json(qj.at("prob"), "query prob");
    if (qj.contains("bids")) {
      for (const auto& [key, val] : qj.at("bids").items()) {
        const int i = std::stoi(key);
        Rat u = rational_from_json(val, "bid");
        if (u != 0) q.bids[i] = std::move(u);  // zero bids mean "no bid"
      }
    }
    inst.queries.push_back(std::move(q));
  }
  return inst;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return instance_from_json(buf.str());
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write instance file: " + path);
  out << instance_to_json(inst) << "\n";
}

std::string scenario_to_json(const Scenario& s) {
  json root;
  root["arrived"] = json::array();
  for (uint8_t a : s.arrived) root["arrived"].push_back(a != 0);
  return root.dump();
}

Scenario scenario_from_json(const std::string& text, const Instance& inst) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  Scenario s;
  for (const auto& v : root.at("arrived")) s.arrived.push_back(v.get<bool>() ? 1 : 0);
  if (static_cast<int>(s.arrived.size()) != inst.num_queries())
    throw ParseError("scenario length " + std::to_string(s.arrived.size()) + " does not match instance query count");
  // At most one arrival per exclusivity group.
  for (const auto& group : exclusivity_groups(inst)) {
    int arrivals = 0;
    for (int j : group) arrivals += s.has(j) ? 1 : 0;
    if (arrivals > 1) throw ParseError("scenario has multiple arrivals in one exclusivity group");
  }
  return s;
}

Scenario load_scenario(const std::string& path, const Instance& inst) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str(), inst);
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scenario file: " + path);
  out << scenario_to_json(s) << "\n";
}

}  // namespace adcell
