#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "exponentlab/agent_opt.hpp"
#include "exponentlab/benchmark.hpp"
#include "exponentlab/expert_opt.hpp"
#include "exponentlab/report.hpp"
#include "exponentlab/scenario_io.hpp"
#include "exponentlab/simulate.hpp"

namespace exponentlab {

struct CommandOptions {
  double grid_step = 0.01;
  AlternatingOptions alternating;
  TransformConfig transform;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string policy_text(const Policy& x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_number(x[i]);
  return s + ")";
}

inline void add_policy_cells(std::vector<Cell>& row, const Policy& x) {
  for (double w : x.weights) row.emplace_back(w);
}

inline std::vector<std::string> policy_columns(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t g = 0; g < n; ++g) out.push_back(prefix + "[" + std::to_string(g) + "]");
  return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline Check within(std::string name, double expected, double actual, double tol, bool hard = true) {
  return {std::move(name), format_number(expected), format_number(actual), format_number(tol), hard,
          std::abs(expected - actual) <= tol};
}

inline void add_trace_rows(Table& t, int expert, double delta, int run, const PolicyRun& r) {
  for (const TraceRow& row : r.trace) {
    std::vector<Cell> cells{static_cast<long long>(expert), delta, static_cast<long long>(run),
                            static_cast<long long>(row.iteration)};
    add_policy_cells(cells, row.policy);
    cells.emplace_back(row.exponent);
    t.add(std::move(cells));
  }
}

}  // namespace detail

inline std::vector<int> expert_ids(const Scenario& sc) {
  std::vector<int> ids;
  for (const Expert& e : sc.experts) ids.push_back(e.id);
  return ids;
}

/// Probability-exponent matrix and I_k per expert, at `policy` or at the
/// policy found by the alternating procedure.
inline Report cmd_exponents(const Scenario& sc, const std::vector<int>& ids, const std::optional<Policy>& policy,
                            const CommandOptions& opt = {}) {
  Report r;
  r.command = "exponents";
  r.scenario_digest = scenario_digest(sc);
  for (int id : ids) {
    const ExpertModel em(sc, id);
    Policy x;
    if (policy) {
      x = *policy;
    } else {
      const ExpertSolution sol = optimize_expert_alternating(em, {}, opt.alternating, opt.transform);
      x = sol.policy;
      r.nonconverged = r.nonconverged || !sol.converged;
    }
    const ExpertEvaluation ev = expert_exponent(em, x, opt.transform);
    r.nonconverged = r.nonconverged || !ev.probability.converged();
    const std::string tag = "expert" + std::to_string(id);
    Table& s = r.table(tag + "_summary", detail::concat(detail::policy_columns("x", x.size()), {"I"}));
    std::vector<Cell> row;
    detail::add_policy_cells(row, x);
    row.emplace_back(ev.exponent);
    s.add(std::move(row));
    Table& t = r.table(tag + "_exponents", {"m", "d", "inf_rate", "loss_rate", "sum", "minimizer"});
    for (std::size_t m = 0; m < em.hypotheses(); ++m)
      for (std::size_t d = 0; d < em.decisions(); ++d) {
        const RegionInfimum& c = ev.probability.cell(m, d);
        const double rate = em.expert.loss.at(m, d).as_double();
        std::string zs = "-";
        if (!c.unreachable) {
          zs = "(";
          for (Eigen::Index i = 0; i < c.minimizer.size(); ++i) zs += (i ? "," : "") + format_number(c.minimizer[i]);
          zs += ")";
        }
        t.add({static_cast<long long>(m), static_cast<long long>(d), c.value, rate, c.value + rate, zs});
      }
    add_region_table(r, tag + "_regions", em.regions);
  }
  return r;
}

inline Report cmd_optimize_expert(const Scenario& sc, int id, const CommandOptions& opt = {}) {
  Report r;
  r.command = "optimize expert " + std::to_string(id);
  r.scenario_digest = scenario_digest(sc);
  const ExpertModel em(sc, id);
  const ExpertSolution sol = optimize_expert_alternating(em, {}, opt.alternating, opt.transform);
  r.nonconverged = !sol.converged;
  const std::size_t n = em.num_sources();
  Table& s = r.table("expert_policy", detail::concat(detail::policy_columns("x", n), {"I", "converged", "iterations"}));
  std::vector<Cell> row;
  detail::add_policy_cells(row, sol.policy);
  row.emplace_back(sol.exponent);
  row.emplace_back(std::string(sol.converged ? "yes" : "no"));
  row.emplace_back(static_cast<long long>(sol.total_iterations()));
  s.add(std::move(row));
  Table& t = r.table("trace", detail::concat({"expert", "delta", "run", "iteration"},
                                             detail::concat(detail::policy_columns("x", n), {"I"})));
  for (std::size_t k = 0; k < sol.runs.size(); ++k)
    detail::add_trace_rows(t, id, std::nan(""), static_cast<int>(k), sol.runs[k]);
  return r;
}

inline Report cmd_optimize_agent0(const Scenario& sc, int id, const CommandOptions& opt = {}) {
  Report r;
  r.command = "optimize agent0 " + std::to_string(id);
  r.scenario_digest = scenario_digest(sc);
  const AgentModel ag(sc);
  std::vector<ExpertSummary> experts;
  if (id != 0) {
    const ExpertModel em(sc, id);
    const ExpertSolution es = optimize_expert_alternating(em, {}, opt.alternating, opt.transform);
    r.nonconverged = !es.converged;
    experts.push_back(ExpertSummary::from(em, es.probability));
  }
  const AgentSolution sol = optimize_agent_policy(ag, experts, {}, opt.alternating, opt.transform);
  r.nonconverged = r.nonconverged || !sol.converged;
  const std::size_t n = ag.num_sources();
  Table& s = r.table("agent0_policy", detail::concat(detail::policy_columns("x0", n), {"E0", "converged", "iterations"}));
  std::vector<Cell> row;
  detail::add_policy_cells(row, sol.policy);
  row.emplace_back(sol.exponent.value);
  row.emplace_back(std::string(sol.converged ? "yes" : "no"));
  row.emplace_back(static_cast<long long>(sol.max_iterations()));
  s.add(std::move(row));
  Table& terms = r.table("inner_terms", {"i", "j", "d", "s", "value"});
  for (const InnerTerm& t : sol.exponent.terms)
    terms.add({static_cast<long long>(t.i), static_cast<long long>(t.j),
               static_cast<long long>(t.decisions.empty() ? 0 : t.decisions.front()), t.s, t.value});
  Table& tr = r.table("trace", detail::concat({"expert", "delta", "run", "iteration"},
                                              detail::concat(detail::policy_columns("x", n), {"E0"})));
  for (std::size_t k = 0; k < sol.runs.size(); ++k)
    detail::add_trace_rows(tr, id, std::nan(""), static_cast<int>(k), sol.runs[k]);
  return r;
}

inline void add_selection_tables(Report& r, const SelectionReport& sel, const std::string& prefix) {
  const std::size_t nk = sel.experts.empty() ? 0 : sel.experts.front().expert_solution.policy.size();
  const std::size_t n0 = sel.baseline.policy.size();
  Table& t = r.table(prefix + "selection",
                     detail::concat(detail::concat({"expert"}, detail::policy_columns("xk", nk)),
                                    detail::concat(detail::policy_columns("x0", n0),
                                                   {"E0", "E0B_k", "E0_none", "E0B_none", "chosen"})));
  for (const ExpertChoice& ch : sel.experts) {
    std::vector<Cell> row{static_cast<long long>(ch.expert)};
    detail::add_policy_cells(row, ch.expert_solution.policy);
    detail::add_policy_cells(row, ch.agent.policy);
    row.emplace_back(ch.agent.exponent.value);
    row.emplace_back(ch.audit.general01);
    row.emplace_back(ch.audit.no_expert);
    row.emplace_back(ch.audit.no_expert01);
    row.emplace_back(std::string(ch.expert == sel.chosen ? "*" : ""));
    t.add(std::move(row));
    r.nonconverged = r.nonconverged || !ch.expert_solution.converged || !ch.agent.converged;
  }
  Table& b = r.table(prefix + "baseline", detail::concat(detail::policy_columns("x0", n0), {"E0_none", "E0B_none"}));
  std::vector<Cell> row;
  detail::add_policy_cells(row, sel.baseline.policy);
  row.emplace_back(sel.baseline.exponent.value);
  row.emplace_back(sel.baseline01);
  b.add(std::move(row));
}

inline Report cmd_optimize_select(const Scenario& sc, const CommandOptions& opt = {},
                                  const std::optional<Policy>& fixed_x0 = std::nullopt) {
  Report r;
  r.command = "optimize select";
  r.scenario_digest = scenario_digest(sc);
  SelectionOptions so;
  so.alternating = opt.alternating;
  so.transform = opt.transform;
  so.fixed_agent_policy = fixed_x0;
  const SelectionReport sel = choose_expert(sc, so);
  add_selection_tables(r, sel, "");
  r.diagnostics["chosen_expert"] = sel.chosen;
  r.diagnostics["inequality_audit_ok"] = sel.audit_ok;
  return r;
}

/// Monte Carlo plan: which experts and agent-0 pairings to simulate, on which grids.
struct SimPlan {
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
  struct Run {
    int expert = 0;  // for agent runs, 0 means no expert
    std::vector<int> sample_sizes;
    std::optional<Policy> policy;
  };
  std::vector<Run> expert_runs;
  std::vector<Run> agent_runs;
};

inline SimPlan sim_plan_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("sim: top level must be an object");
  if (doc.contains("schema") && doc.at("schema") != 1) throw ParseError("sim: unsupported schema version");
  SimPlan p;
  try {
    p.seed = doc.value("seed", std::uint64_t{1});
    p.trials = doc.value("trials", std::uint64_t{100000});
    auto runs = [&](const char* key, std::vector<SimPlan::Run>& out) {
      if (!doc.contains(key)) return;
      for (const auto& j : doc.at(key)) {
        SimPlan::Run r;
        r.expert = j.at("expert").get<int>();
        r.sample_sizes = j.at("n").get<std::vector<int>>();
        if (j.contains("policy")) r.policy = Policy{j.at("policy").get<std::vector<double>>()};
        out.push_back(std::move(r));
      }
    };
    runs("expert_runs", p.expert_runs);
    runs("agent_runs", p.agent_runs);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sim: ") + e.what());
  }
  if (p.trials < 1) throw ValidationError("sim.trials", "must be >= 1");
  return p;
}

inline SimPlan load_sim_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sim config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return sim_plan_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("sim: ") + e.what());
  }
}

inline void add_slope_points(Table& t, const std::string& what, int expert, std::size_t m, std::size_t d,
                             const SlopeEstimate& s) {
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const SlopePoint& p = s.points[i];
    const bool used = std::find(s.used.begin(), s.used.end(), i) != s.used.end();
    t.add({what, static_cast<long long>(expert), static_cast<long long>(m), static_cast<long long>(d),
           static_cast<long long>(p.n),
           p.censored ? Cell(std::string("≤ ") + format_number(p.log_value)) : Cell(p.log_value),
           std::string(used ? "yes" : "no")});
  }
}

inline Report cmd_simulate(const Scenario& sc, const SimPlan& plan, const CommandOptions& opt = {}) {
  Report r;
  r.command = "simulate";
  r.scenario_digest = scenario_digest(sc);
  const std::uint64_t seed = opt.seed.value_or(plan.seed);
  Table& slopes = r.table("slopes", {"kind", "expert", "analytic", "empirical", "std_error", "ratio", "valid"});
  Table& cells = r.table("cell_slopes", {"expert", "m", "d", "analytic", "empirical", "std_error", "valid"});
  Table& points = r.table("points", {"series", "expert", "m", "d", "n", "log_value", "used"});
  Table& counts = r.table("counts", {"series", "expert", "n", "true", "decision", "count"});
  auto slope_row = [&](const std::string& kind, int expert, double analytic, const SlopeEstimate& s) {
    slopes.add({kind, static_cast<long long>(expert), analytic, s.valid ? Cell(s.exponent()) : Cell(std::string("n/a")),
                s.standard_error, s.valid ? Cell(s.exponent() / analytic) : Cell(std::string("n/a")),
                std::string(s.valid ? "yes" : "no")});
  };

  for (const SimPlan::Run& run : plan.expert_runs) {
    const ExpertModel em(sc, run.expert);
    Policy x;
    if (run.policy) {
      x = *run.policy;
    } else {
      x = optimize_expert_alternating(em, {}, opt.alternating, opt.transform).policy;
    }
    const ExpertEvaluation ev = expert_exponent(em, x, opt.transform);
    SimConfig cfg{run.sample_sizes, plan.trials, seed, 0};
    const ExpertSimResult res = simulate_expert(sc, em, x, cfg);
    slope_row("expert_loss", run.expert, ev.exponent, res.loss);
    add_slope_points(points, "expert_loss", run.expert, 0, 0, res.loss);
    for (std::size_t m = 0; m < res.hypotheses; ++m)
      for (std::size_t d = 0; d < res.decisions; ++d) {
        const SlopeEstimate& s = res.cells[m * res.decisions + d];
        cells.add({static_cast<long long>(run.expert), static_cast<long long>(m), static_cast<long long>(d),
                   ev.probability(m, d), s.valid ? Cell(s.exponent()) : Cell(std::string("n/a")), s.standard_error,
                   std::string(s.valid ? "yes" : "no")});
      }
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni)
      for (std::size_t m = 0; m < res.hypotheses; ++m)
        for (std::size_t d = 0; d < res.decisions; ++d)
          counts.add({std::string("expert"), static_cast<long long>(run.expert),
                      static_cast<long long>(cfg.sample_sizes[ni]), static_cast<long long>(m),
                      static_cast<long long>(d), static_cast<long long>(res.count(ni, m, d))});
  }

  const AgentModel ag(sc);
  for (const SimPlan::Run& run : plan.agent_runs) {
    std::optional<ExpertModel> em;
    std::optional<ExpertSummary> summary;
    Policy xk;
    std::vector<ExpertSummary> experts;
    if (run.expert != 0) {
      em.emplace(sc, run.expert);
      const ExpertSolution es = optimize_expert_alternating(*em, {}, opt.alternating, opt.transform);
      xk = es.policy;
      summary = ExpertSummary::from(*em, es.probability);
      experts.push_back(*summary);
    }
    Policy x0;
    if (run.policy) {
      x0 = *run.policy;
    } else {
      x0 = optimize_agent_policy(ag, experts, {}, opt.alternating, opt.transform).policy;
    }
    const double analytic = agent_exponent_multi(ag, experts, x0, opt.transform).value;
    SimConfig cfg{run.sample_sizes, plan.trials, seed, 0};
    const AgentSimResult res = simulate_agent0(sc, x0, em ? &*em : nullptr, em ? &xk : nullptr,
                                               summary ? &*summary : nullptr, cfg);
    slope_row("agent0_loss", run.expert, analytic, res.loss);
    add_slope_points(points, "agent0_loss", run.expert, 0, 0, res.loss);
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
      for (std::size_t m = 0; m < res.hypotheses; ++m)
        for (std::size_t d = 0; d < res.hypotheses; ++d)
          counts.add({std::string("agent0"), static_cast<long long>(run.expert),
                      static_cast<long long>(cfg.sample_sizes[ni]), static_cast<long long>(m),
                      static_cast<long long>(d), static_cast<long long>(res.counts[ni][m * res.hypotheses + d])});
      if (res.fallback_rate(ni) > 0.01)
        r.diagnostics["fallback_flags"].push_back(
            {{"expert", run.expert}, {"n", cfg.sample_sizes[ni]}, {"rate", res.fallback_rate(ni)}});
    }
  }
  r.diagnostics["seed"] = seed;
  r.diagnostics["trials"] = plan.trials;
  return r;
}

/// Regenerates the numerical study on the bundled three-hypothesis scenario.
inline Report cmd_reproduce(const Scenario& base, const CommandOptions& opt = {}) {
  Report r;
  r.command = "reproduce";
  r.scenario_digest = scenario_digest(base);
  const double delta0 = base.sources.at(0).means.at(1);

  // Optimal policies and expert choice with the bundled agent loss.
  SelectionOptions so;
  so.alternating = opt.alternating;
  so.transform = opt.transform;
  const SelectionReport sel = choose_expert(base, so);
  add_selection_tables(r, sel, "main_");
  const double want_xk[3] = {0.5, 1.0, 0.5};
  const double want_x0[3] = {0.5, 0.2117, 0.5};
  const double want_e0[3] = {0.1099, 0.1158, 0.1066};
  for (std::size_t k = 0; k < sel.experts.size() && k < 3; ++k) {
    const ExpertChoice& ch = sel.experts[k];
    const std::string e = "expert " + std::to_string(ch.expert);
    r.checks.push_back(detail::within(e + " policy x[0]", want_xk[k], ch.expert_solution.policy[0], 0.01));
    r.checks.push_back(detail::within(e + " agent0 policy x0[0]", want_x0[k], ch.agent.policy[0], 0.01));
    r.checks.push_back(detail::within(e + " agent0 exponent", want_e0[k], ch.agent.exponent.value, 1e-3));
  }
  r.checks.push_back({"chosen expert", "2", std::to_string(sel.chosen), "exact", true, sel.chosen == 2});
  r.checks.push_back({"inequality chain", "holds", sel.audit_ok ? "holds" : "violated", "1e-9", true, sel.audit_ok});

  // Agent on 0-1 loss, policy held at the barycenter.
  Scenario zo = base;
  zo.agent0.loss = LossSpec::zero_one(base.num_hypotheses);
  SelectionOptions fixed = so;
  fixed.fixed_agent_policy = Policy::barycenter(2);
  const SelectionReport sel01 = choose_expert(zo, fixed);
  add_selection_tables(r, sel01, "zero_one_fixed_");
  const double want01[3] = {0.0884, 0.0566, 0.0750};
  for (std::size_t k = 0; k < sel01.experts.size() && k < 3; ++k)
    r.checks.push_back(detail::within("0-1 agent, expert " + std::to_string(sel01.experts[k].expert) + " exponent",
                                      want01[k], sel01.experts[k].agent.exponent.value, 1e-3));
  r.checks.push_back({"0-1 agent chosen expert", "1", std::to_string(sel01.chosen), "exact", true, sel01.chosen == 1});
  const SelectionReport sel01opt = choose_expert(zo, so);
  add_selection_tables(r, sel01opt, "zero_one_optimized_");
  r.diagnostics["zero_one_optimized_choice"] = sel01opt.chosen;

  // Same agent policy, original agent loss: expert 1 over expert 3.
  const SelectionReport selfix = choose_expert(base, fixed);
  add_selection_tables(r, selfix, "main_fixed_");
  const double e1 = selfix.experts.at(0).agent.exponent.value, e3 = selfix.experts.at(2).agent.exponent.value;
  r.checks.push_back({"fixed x0: expert 1 preferred over 3", "E(1) > E(3)",
                      format_number(e1) + " vs " + format_number(e3), "strict", true, e1 > e3});

  // Equal-decision-space audit with the agent on 0-1 loss.
  std::vector<Policy> xk;
  for (const ExpertChoice& ch : sel01.experts) xk.push_back(ch.expert_solution.policy);
  const ZeroOneExpertAudit audit = audit_zero_one_expert(base, xk, Policy::barycenter(2), opt.transform);
  Table& at = r.table("zero_one_expert_audit", {"expert", "zero_one_loss", "rate_gap_exponent", "region_exponent"});
  for (std::size_t k = 0; k < audit.values.size(); ++k)
    at.add({static_cast<long long>(audit.expert_ids[k]), std::string(audit.zero_one[k] ? "yes" : "no"), audit.values[k],
            audit.general[k]});
  r.checks.push_back({"0-1 expert attains the best rate-gap exponent", "yes", audit.passes ? "yes" : "no", "1e-9", true,
                      audit.passes});
  r.checks.push_back({"0-1 expert attains the best region exponent", "yes", audit.passes_general ? "yes" : "no",
                      "1e-9", true, audit.passes_general});
  r.checks.push_back({"symmetric pairwise Lambda", "yes", audit.symmetric_pairs ? "yes" : "no", "1e-12", true,
                      audit.symmetric_pairs});

  // Policy invariance in delta, iteration counts, and single-guess traps.
  const std::vector<double> deltas = {0.5, 0.7, 0.9, 1.0};
  Table& sweep = r.table("delta_sweep", {"expert", "delta", "grid_x[0]", "grid_I", "alt_x[0]", "alt_I",
                                         "alt_iterations", "single_guess_x[0]", "trap"});
  Table& trace = r.table("iteration_trace", {"expert", "delta", "run", "iteration", "x[0]", "x[1]", "I"});
  std::vector<double> reference(sel.experts.size(), std::nan(""));
  bool trapped = false;
  for (double delta : deltas) {
    Scenario sd = base;
    for (SourceModel& s : sd.sources) s.means.at(1) = (s.means.at(1) >= 0 ? 1.0 : -1.0) * delta;
    for (std::size_t k = 0; k < sd.experts.size(); ++k) {
      const int id = sd.experts[k].id;
      const ExpertModel em(sd, id);
      const ExpertSolution grid = optimize_expert_grid(em, opt.grid_step, opt.transform);
      const ExpertSolution alt = optimize_expert_alternating(em, {Policy{{0.0, 1.0}}, Policy{{0.3, 0.7}}},
                                                             opt.alternating, opt.transform);
      const ExpertSolution single = optimize_expert_alternating(em, {Policy{{0.0, 1.0}}}, opt.alternating, opt.transform);
      const bool trap = std::abs(single.policy[0] - grid.policy[0]) > 0.05;
      trapped = trapped || trap;
      sweep.add({static_cast<long long>(id), delta, grid.policy[0], grid.exponent, alt.policy[0], alt.exponent,
                 static_cast<long long>(alt.total_iterations()), single.policy[0], std::string(trap ? "yes" : "no")});
      for (std::size_t run = 0; run < alt.runs.size(); ++run)
        detail::add_trace_rows(trace, id, delta, static_cast<int>(run), alt.runs[run]);
      if (std::isnan(reference[k])) reference[k] = grid.policy[0];
      const std::string tag = "expert " + std::to_string(id) + " delta " + format_number(delta);
      r.checks.push_back(detail::within(tag + " grid policy invariant", reference[k], grid.policy[0], 0.01));
      r.checks.push_back(detail::within(tag + " alternating matches grid", grid.policy[0], alt.policy[0], 0.01));
      r.checks.push_back({tag + " iterations", "<= 30", std::to_string(alt.total_iterations()), "soft", false,
                          alt.total_iterations() <= 30});
    }
  }
  r.checks.push_back({"single-guess trap observed", "yes", trapped ? "yes" : "no", "> 0.05", true, trapped});
  for (const ExpertChoice& ch : sel.experts)
    r.checks.push_back({"agent0 iterations with expert " + std::to_string(ch.expert), "<= 10",
                        std::to_string(ch.agent.max_iterations()), "soft", false, ch.agent.max_iterations() <= 10});

  // Region boundaries at the bundled delta.
  for (const Expert& e : base.experts)
    add_region_table(r, "regions_expert" + std::to_string(e.id), ExpertModel(base, e.id).regions);
  r.diagnostics["delta"] = delta0;
  return r;
}

}  // namespace exponentlab
