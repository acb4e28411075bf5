// exponentlab: command-line front end over the header library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "exponentlab/commands.hpp"

namespace el = exponentlab;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kStrictNonconvergence = 3, kReproductionFailure = 4 };

el::Policy parse_policy(const std::string& text) {
  el::Policy p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double w = 0.0;
    try {
      w = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw el::ParseError("--policy: cannot read '" + item + "'");
    p.weights.push_back(w);
  }
  if (p.weights.empty()) throw el::ParseError("--policy: empty");
  return p;
}

void error_record(const char* kind, const std::string& message, const std::string& field = {}) {
  nlohmann::json rec{{"error", kind}, {"message", message}};
  if (!field.empty()) rec["field"] = field;
  std::cerr << rec.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error exponents for expert-assisted hypothesis testing"};
  app.require_subcommand(1);

  std::string scenario_path, expert_arg = "all", policy_arg, sim_path, csv_dir, json_path;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  double grid_step = 0.01, tol = 1e-6;

  auto common = [&](CLI::App* sub, bool need_scenario) {
    auto* opt = sub->add_option("--scenario", scenario_path, "scenario JSON file");
    if (need_scenario) opt->required();
    sub->add_option("--csv", csv_dir, "write one CSV per table into DIR");
    sub->add_option("--json", json_path, "write the JSON report to PATH");
    sub->add_flag("--strict", strict, "exit 3 when an optimizer did not converge");
    sub->add_option("--tol", tol, "alternating-procedure stopping tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--grid-step", grid_step, "grid oracle step")->check(CLI::Range(1e-4, 0.5));
  };

  auto* exponents = app.add_subcommand("exponents", "region exponents and I_k per expert");
  common(exponents, true);
  exponents->add_option("--expert", expert_arg, "expert id or 'all'");
  exponents->add_option("--policy", policy_arg, "policy w1,w2,... (default: optimized)");

  auto* optimize = app.add_subcommand("optimize", "optimize an expert, agent 0, or select an expert");
  common(optimize, true);
  std::string target;
  int target_id = 0;
  optimize->add_option("target", target, "expert | agent0 | select")
      ->required()
      ->check(CLI::IsMember({"expert", "agent0", "select"}));
  optimize->add_option("k", target_id, "expert id (agent0: 0 for none)");
  optimize->add_option("--policy", policy_arg, "select: hold agent 0 at this policy");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo slopes against the analytic exponents");
  common(simulate, true);
  simulate->add_option("--sim", sim_path, "simulation config JSON")->required();
  simulate->add_option("--seed", seed, "override the config seed");

  auto* reproduce = app.add_subcommand("reproduce", "regenerate the numerical study with checks");
  common(reproduce, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    error_record("UsageError", e.what());
    return kInputError;
  }

  el::CommandOptions opt;
  opt.grid_step = grid_step;
  opt.alternating.tolerance = tol;
  opt.seed = seed;

  el::Report report;
  try {
    const el::Scenario sc = scenario_path.empty() ? el::benchmark_scenario() : el::load_scenario(scenario_path);
    if (*exponents) {
      std::vector<int> ids;
      if (expert_arg == "all") {
        ids = el::expert_ids(sc);
      } else {
        try {
          ids.push_back(std::stoi(expert_arg));
        } catch (const std::exception&) {
          throw el::ParseError("--expert: expected an id or 'all', got '" + expert_arg + "'");
        }
      }
      std::optional<el::Policy> policy;
      if (!policy_arg.empty()) policy = parse_policy(policy_arg);
      report = el::cmd_exponents(sc, ids, policy, opt);
    } else if (*optimize) {
      if (target == "expert") {
        report = el::cmd_optimize_expert(sc, target_id, opt);
      } else if (target == "agent0") {
        report = el::cmd_optimize_agent0(sc, target_id, opt);
      } else {
        std::optional<el::Policy> x0;
        if (!policy_arg.empty()) x0 = parse_policy(policy_arg);
        report = el::cmd_optimize_select(sc, opt, x0);
      }
    } else if (*simulate) {
      report = el::cmd_simulate(sc, el::load_sim_plan(sim_path), opt);
    } else {
      report = el::cmd_reproduce(sc, opt);
    }
    el::write_text(std::cout, report);
    if (!json_path.empty()) {
      std::ofstream out(json_path);
      if (!out) throw el::ResourceError("cannot write '" + json_path + "'");
      out << el::report_json(report).dump(2) << '\n';
    }
    if (!csv_dir.empty()) el::write_csv(csv_dir, report);
  } catch (const el::ValidationError& e) {
    error_record("ValidationError", e.what(), e.field());
    return kInputError;
  } catch (const el::ParseError& e) {
    error_record("ParseError", e.what());
    return kInputError;
  } catch (const el::ResourceError& e) {
    error_record("ResourceError", e.what());
    return kInputError;
  } catch (const std::invalid_argument& e) {
    error_record("InvalidArgument", e.what());
    return kInputError;
  } catch (const std::out_of_range& e) {
    error_record("InvalidArgument", e.what());
    return kInputError;
  }

  if (report.hard_failure()) return kReproductionFailure;
  if (strict && report.nonconverged) return kStrictNonconvergence;
  return kOk;
}
