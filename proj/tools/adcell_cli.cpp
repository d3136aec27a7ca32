// Command line surface for the allocation solver: instance generation, exact
// LP solves, offline rounding, Monte Carlo simulation, brute-force oracles,
// and a per-instance invariant check.
//
// Exit codes: 0 ok, 1 invalid input, 2 size guard, 3 invariant violation.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adcell/harness.hpp"
#include "adcell/lp.hpp"
#include "adcell/model.hpp"
#include "adcell/oracle.hpp"
#include "adcell/rounding.hpp"

namespace {

using namespace adcell;

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << text << "\n";
}

Instance load_and_validate(const std::string& path) {
  Instance inst = load_instance(path);
  const auto report = validate_instance(inst);
  if (!report.empty()) {
    for (const auto& issue : report) std::cerr << "invalid: " << issue.path << ": " << issue.message << "\n";
    throw ParseError("instance failed validation");
  }
  return inst;
}

LpVariant variant_from(const std::string& name) {
  if (name == "b") return LpVariant::B;
  if (name == "c") return LpVariant::C;
  return LpVariant::BC;
}

int run_verify(const Instance& inst, uint64_t seed, uint64_t trials) {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };

  const LpSolution b = lp_round_trip(inst, LpVariant::B);
  const LpSolution c = lp_round_trip(inst, LpVariant::C);
  const LpSolution bc = lp_round_trip(inst, LpVariant::BC);
  check(bc.objective_value <= b.objective_value && bc.objective_value <= c.objective_value,
        "expectation LP: bc objective <= min(b, c)");

  // Expectation-LP dominance by exhaustive scenario enumeration, when small.
  const auto groups = exclusivity_groups(inst);
  double scenarios = 1;
  for (const auto& g : groups) scenarios *= static_cast<double>(g.size() + 1);
  if (scenarios <= 4096) {
    Rat expected(0);
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
      if (prob != 0) expected += prob * lp_round_trip(inst, LpVariant::BC, s).objective_value;
      size_t g = 0;
      for (; g < groups.size(); ++g) {
        if (++choice[g] <= groups[g].size()) break;
        choice[g] = 0;
      }
      if (g == groups.size()) break;
    }
    check(expected <= bc.objective_value, "expectation LP dominates E[realized LP] (exact)");
  }

  // Rounding: capacity and assignment rows hold exactly on every run.
  bool rounding_ok = true;
  Rng scen_rng(derive_seed(seed, 17));
  const Scenario scenario = sample_scenario(inst, scen_rng);
  const LinearProgram lp = build_lp(inst, LpVariant::BC, scenario);
  const LpSolution sol = solve_lp(lp);
  const FractionalAssignment y = solution_to_assignment(lp, sol);
  for (uint64_t t = 0; t < std::min<uint64_t>(trials, 1000); ++t) {
    Rng rng(derive_seed(seed, 1000 + t));
    RoundingOptions opts;
    opts.check_each_step = true;
    opts.record_trace = false;
    try {
      const RoundingResult res = round_offline(inst, scenario, y, rng, opts);
      check_assignment(inst, res.assignment, &scenario);
    } catch (const std::exception& e) {
      std::cerr << "rounding violation: " << e.what() << "\n";
      rounding_ok = false;
      break;
    }
  }
  check(rounding_ok, "offline rounding keeps assign/capacity rows exact");

  // Forestify preserves the objective exactly.
  try {
    const FractionalAssignment forest = forestify(inst, y);
    check(fractional_revenue(inst, forest) == fractional_revenue(inst, y), "forestify preserves the objective");
  } catch (const std::exception& e) {
    std::cerr << "forestify: " << e.what() << "\n";
    ++failures;
  }

  // Sampled arrival frequencies match p_j within 5 sigma.
  {
    std::vector<uint64_t> counts(inst.num_queries(), 0);
    const uint64_t n = std::max<uint64_t>(trials, 1000);
    for (uint64_t t = 0; t < n; ++t) {
      Rng rng(derive_seed(seed, 50000 + t));
      const Scenario s = sample_scenario(inst, rng);
      for (int j = 0; j < inst.num_queries(); ++j)
        if (s.has(j)) ++counts[j];
    }
    bool marginals_ok = true;
    for (int j = 0; j < inst.num_queries(); ++j) {
      const double p = to_double(inst.queries[j].prob);
      const double freq = static_cast<double>(counts[j]) / static_cast<double>(n);
      const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(n));
      if (std::abs(freq - p) > 5 * sigma + 1e-9) marginals_ok = false;
    }
    check(marginals_ok, "sampled arrival marginals match p_j");
  }
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdCell budgeted and capacitated ad-allocation solver"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a named instance");
  std::string gen_kind, gen_out;
  int gen_n = 4;
  std::string gen_eps = "1/10";
  int gen_m = 2, gen_s = 2;
  std::string gen_bid_scale = "2", gen_budget_scale = "4";
  uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("kind", gen_kind, "integrality-gap | half-tight | random")->required();
  gen->add_option("-o,--out", gen_out, "output instance file (stdout when omitted)");
  gen->add_option("--n", gen_n, "query count (integrality-gap, random)");
  gen->add_option("--eps", gen_eps, "epsilon as a rational (half-tight)");
  gen->add_option("--m", gen_m, "advertiser count (random)");
  gen->add_option("--s", gen_s, "customer count (random)");
  gen->add_option("--bid-scale", gen_bid_scale, "bid scale (random)");
  gen->add_option("--budget-scale", gen_budget_scale, "budget scale (random)");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "seed (required for random)");

  // lp
  auto* lp_cmd = app.add_subcommand("lp", "build and solve a relaxation exactly");
  std::string lp_in, lp_variant = "bc", lp_mode = "expectation", lp_scenario, lp_dump;
  lp_cmd->add_option("-i,--instance", lp_in)->required();
  lp_cmd->add_option("--variant", lp_variant, "b | c | bc")->check(CLI::IsMember({"b", "c", "bc"}));
  lp_cmd->add_option("--mode", lp_mode, "expectation | realized")->check(CLI::IsMember({"expectation", "realized"}));
  lp_cmd->add_option("--scenario", lp_scenario, "scenario file (realized mode)");
  lp_cmd->add_option("--dump", lp_dump, "write a human-readable LP dump to this path");

  // solve-offline
  auto* off = app.add_subcommand("solve-offline", "solve realized LP and round to an integral allocation");
  std::string off_in, off_scenario, off_trace;
  uint64_t off_seed = 0;
  off->add_option("-i,--instance", off_in)->required();
  off->add_option("--scenario", off_scenario)->required();
  off->add_option("--seed", off_seed)->required();
  off->add_option("--trace", off_trace, "write the rounding trace as JSON lines");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo policy evaluation");
  std::string sim_in, sim_policy, sim_csv, sim_per_trial;
  uint64_t sim_trials = 10000, sim_seed = 0;
  int sim_jobs = 1;
  sim->add_option("-i,--instance", sim_in)->required();
  sim->add_option("--policy", sim_policy, "ipb | ipc | ipbc | offline-round")->required();
  sim->add_option("--trials", sim_trials)->required();
  sim->add_option("--seed", sim_seed)->required();
  sim->add_option("--jobs", sim_jobs, "worker threads");
  sim->add_option("--csv", sim_csv, "append a CSV row to this file");
  sim->add_option("--per-trial", sim_per_trial, "write per-trial revenues as CSV");

  // oracle
  auto* ora = app.add_subcommand("oracle", "exact brute-force baselines");
  std::string ora_in, ora_which, ora_scenario;
  ora->add_option("-i,--instance", ora_in)->required();
  ora->add_option("--which", ora_which, "offline | expected-offline | online")
      ->required()
      ->check(CLI::IsMember({"offline", "expected-offline", "online"}));
  ora->add_option("--scenario", ora_scenario, "scenario file (required for --which offline)");

  // verify
  auto* ver = app.add_subcommand("verify", "run the invariant suite on one instance");
  std::string ver_in;
  uint64_t ver_seed = 0, ver_trials = 1000;
  ver->add_option("-i,--instance", ver_in)->required();
  ver->add_option("--seed", ver_seed)->required();
  ver->add_option("--trials", ver_trials);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      gen_seed_set = gen_seed_opt->count() > 0;
      Instance inst;
      if (gen_kind == "integrality-gap") {
        inst = gen_integrality_gap(gen_n);
      } else if (gen_kind == "half-tight") {
        inst = gen_half_tight(parse_rational(gen_eps));
      } else if (gen_kind == "random") {
        if (!gen_seed_set) throw ParseError("gen random requires --seed");
        RandomInstanceParams params;
        params.num_advertisers = gen_m;
        params.num_queries = gen_n;
        params.num_customers = gen_s;
        params.bid_scale = parse_rational(gen_bid_scale);
        params.budget_scale = parse_rational(gen_budget_scale);
        inst = gen_random_instance(params, gen_seed);
      } else {
        throw ParseError("unknown generator kind: " + gen_kind);
      }
      write_or_print(instance_to_json(inst), gen_out);
      return 0;
    }

    if (lp_cmd->parsed()) {
      const Instance inst = load_and_validate(lp_in);
      std::optional<Scenario> scenario;
      if (lp_mode == "realized") {
        if (lp_scenario.empty()) throw ParseError("realized mode requires --scenario");
        scenario = load_scenario(lp_scenario, inst);
      }
      const LinearProgram lp = build_lp(inst, variant_from(lp_variant), scenario);
      if (!lp_dump.empty()) write_or_print(dump_lp(lp), lp_dump);
      const LpSolution sol = solve_lp(lp);
      if (sol.status != LpStatus::Optimal) {
        std::cout << "status: " << (sol.status == LpStatus::Infeasible ? "infeasible" : "unbounded") << "\n";
        return 0;
      }
      std::cout << "objective: " << rational_to_string(sol.objective_value) << "\n";
      for (int c = 0; c < lp.num_columns(); ++c) {
        if (sol.values[c] == 0) continue;
        std::cout << "x[adv=" << lp.columns[c].first << ",query=" << lp.columns[c].second
                  << "] = " << rational_to_string(sol.values[c]) << "\n";
      }
      return 0;
    }

    if (off->parsed()) {
      const Instance inst = load_and_validate(off_in);
      const Scenario scenario = load_scenario(off_scenario, inst);
      const LinearProgram lp = build_lp(inst, LpVariant::BC, scenario);
      const LpSolution sol = solve_lp(lp);
      Rng rng(derive_seed(off_seed, 0));
      RoundingOptions opts;
      opts.record_trace = true;
      const RoundingResult res = round_offline(inst, scenario, solution_to_assignment(lp, sol), rng, opts);
      if (!off_trace.empty()) {
        std::ofstream out(off_trace);
        out << res.trace.to_jsonl();
      }
      const Rat revenue = integral_revenue(inst, res.assignment);
      std::cout << "lp_objective: " << rational_to_string(sol.objective_value) << "\n";
      std::cout << "integral_revenue: " << rational_to_string(revenue) << "\n";
      if (sol.objective_value > 0)
        std::cout << "ratio: " << to_double(revenue) / to_double(sol.objective_value) << "\n";
      std::cout << "ratio_bound: " << rational_to_string(approx_ratio_bound(inst)) << "\n";
      for (const auto& [j, i] : res.assignment.advertiser_of)
        std::cout << "assign query " << j << " -> advertiser " << i << "\n";
      return 0;
    }

    if (sim->parsed()) {
      const Instance inst = load_and_validate(sim_in);
      const auto policy = policy_from_name(sim_policy);
      if (!policy) throw ParseError("unknown policy: " + sim_policy);
      std::vector<double> per_trial;
      const McReport report =
          monte_carlo(inst, *policy, sim_trials, sim_seed, sim_jobs, sim_per_trial.empty() ? nullptr : &per_trial);
      std::cout << report.to_json() << "\n";
      if (!sim_csv.empty()) {
        const bool fresh = !std::ifstream(sim_csv).good();
        std::ofstream out(sim_csv, std::ios::app);
        if (fresh) out << McReport::csv_header() << "\n";
        out << report.to_csv_row() << "\n";
      }
      if (!sim_per_trial.empty()) {
        std::ofstream out(sim_per_trial);
        out << "trial,revenue\n";
        for (size_t t = 0; t < per_trial.size(); ++t) out << t << "," << per_trial[t] << "\n";
      }
      return 0;
    }

    if (ora->parsed()) {
      const Instance inst = load_and_validate(ora_in);
      if (ora_which == "offline") {
        if (ora_scenario.empty()) throw ParseError("--which offline requires --scenario");
        const Scenario scenario = load_scenario(ora_scenario, inst);
        const OfflineOptimum opt = offline_opt_exact(inst, scenario);
        std::cout << rational_to_string(opt.value) << "\n";
      } else if (ora_which == "expected-offline") {
        std::cout << rational_to_string(expected_offline_opt_exact(inst)) << "\n";
      } else {
        std::cout << rational_to_string(online_opt_exact(inst)) << "\n";
      }
      return 0;
    }

    if (ver->parsed()) {
      const Instance inst = load_and_validate(ver_in);
      return run_verify(inst, ver_seed, ver_trials);
    }
  } catch (const SizeGuardError& e) {
    std::cerr << "size guard: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
