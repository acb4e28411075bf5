#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "exponentlab/expert_opt.hpp"
#include "exponentlab/fenchel.hpp"
#include "exponentlab/golden.hpp"

namespace exponentlab {

enum class ExponentFlavor { general, bayesian01, no_expert, multi_expert };

inline const char* to_string(ExponentFlavor f) {
  switch (f) {
    case ExponentFlavor::general: return "general";
    case ExponentFlavor::bayesian01: return "bayesian-01";
    case ExponentFlavor::no_expert: return "no-expert";
    case ExponentFlavor::multi_expert: return "multi-expert";
  }
  return "?";
}

/// What agent 0 needs from an expert: q_k and inf_{A(d)} Phi*_m at x_k.
struct ExpertSummary {
  int id = 0;
  double q = 0.0;
  std::size_t hypotheses = 0, decisions = 1;
  std::vector<double> infima;  // hypotheses x decisions, +inf allowed

  double at(std::size_t m, std::size_t d) const { return infima.at(m * decisions + d); }

  static ExpertSummary from(const ExpertModel& em, const ExponentMatrix& P) {
    ExpertSummary s{em.expert.id, em.expert.q, P.hypotheses, P.decisions, {}};
    for (const RegionInfimum& c : P.cells) s.infima.push_back(c.value);
    return s;
  }
  /// The expert-free baseline: a single uninformative decision.
  static ExpertSummary none(std::size_t hypotheses) {
    return {0, 0.0, hypotheses, 1, std::vector<double>(hypotheses, 0.0)};
  }
};

struct InnerTerm {
  std::size_t i = 0, j = 0;
  std::vector<std::size_t> decisions;  // one per expert (a single d for one expert)
  double a_i = 0.0, a_j = 0.0;         // q inf Phi*_i + c_0(i), likewise for j
  double s = 0.5;
  double value = 0.0;
};

struct AgentExponent {
  int expert = 0;
  Policy policy;
  double value = 0.0;
  std::vector<InnerTerm> terms;
  ExponentFlavor flavor = ExponentFlavor::general;
  std::size_t argmin = 0;
};

/// Agent 0's sources and loss rates.
struct AgentModel {
  LlrFamily family;
  std::vector<double> rates;  // c_0(m)

  explicit AgentModel(const Scenario& sc)
      : family(sc, sc.agent0.sources), rates(sc.agent0.rates()) {}
  AgentModel(LlrFamily fam, std::vector<double> c0) : family(std::move(fam)), rates(std::move(c0)) {}

  std::size_t hypotheses() const { return family.hypotheses(); }
  std::size_t num_sources() const { return family.size(); }
  AgentModel zero_one() const { return {family, std::vector<double>(rates.size(), 0.0)}; }
};

namespace detail {

// max_{s in [0,1]} (1-s) a_i + s a_j - Lambda_ij(s, x0).
inline void maximize_inner(const AgentModel& ag, const Policy& x0, InnerTerm& t, double tol) {
  if (std::isinf(t.a_i) || std::isinf(t.a_j)) {
    t.s = std::isinf(t.a_j) ? 1.0 : 0.0;
    t.value = kInf;
    return;
  }
  const ScalarOptimum o = golden_section_maximize(
      [&](double s) { return (1.0 - s) * t.a_i + s * t.a_j - lambda_ij(ag.family, t.i, t.j, x0, s); },
      0.0, 1.0, tol);
  t.s = o.argument;
  t.value = o.value;
}

inline double weighted_term(double q, double inf) { return q == 0.0 ? 0.0 : q * inf; }

}  // namespace detail

/// E_0 for agent 0 following the experts in `experts` (empty: no expert).
/// Unordered pairs i < j, all decision tuples; minimum of the s-maxima.
inline AgentExponent agent_exponent_multi(const AgentModel& ag, const std::vector<ExpertSummary>& experts,
                                          const Policy& x0, const TransformConfig& cfg = {},
                                          std::size_t tuple_cap = 1'000'000) {
  validate_policy(x0, ag.num_sources(), "agent0 policy");
  const std::size_t M = ag.hypotheses();
  std::size_t tuples = 1;
  for (const ExpertSummary& e : experts) {
    if (tuples > tuple_cap / e.decisions)
      throw ResourceError("agent_exponent_multi: decision tuples exceed the cap of " +
                          std::to_string(tuple_cap));
    tuples *= e.decisions;
  }
  AgentExponent out;
  out.policy = x0;
  out.value = kInf;
  out.flavor = experts.empty() ? ExponentFlavor::no_expert
               : experts.size() == 1 ? ExponentFlavor::general
                                     : ExponentFlavor::multi_expert;
  if (experts.size() == 1) out.expert = experts.front().id;
  std::vector<std::size_t> tuple(experts.size(), 0);
  for (std::size_t idx = 0; idx < tuples; ++idx) {
    std::size_t r = idx;
    for (std::size_t k = experts.size(); k-- > 0;) {
      tuple[k] = r % experts[k].decisions;
      r /= experts[k].decisions;
    }
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = i + 1; j < M; ++j) {
        InnerTerm t;
        t.i = i;
        t.j = j;
        t.decisions = tuple;
        t.a_i = ag.rates[i];
        t.a_j = ag.rates[j];
        for (std::size_t k = 0; k < experts.size(); ++k) {
          t.a_i += detail::weighted_term(experts[k].q, experts[k].at(i, tuple[k]));
          t.a_j += detail::weighted_term(experts[k].q, experts[k].at(j, tuple[k]));
        }
        detail::maximize_inner(ag, x0, t, cfg.golden_tolerance);
        if (t.value < out.value) {
          out.value = t.value;
          out.argmin = out.terms.size();
        }
        out.terms.push_back(std::move(t));
      }
  }
  return out;
}

/// E_0(k, x0).
inline AgentExponent agent_exponent(const AgentModel& ag, const ExpertSummary& ex, const Policy& x0,
                                    const TransformConfig& cfg = {}) {
  return agent_exponent_multi(ag, {ex}, x0, cfg);
}

/// E_0(0, x0): no expert, equivalently q_k = 0.
inline AgentExponent agent_exponent_no_expert(const AgentModel& ag, const Policy& x0,
                                              const TransformConfig& cfg = {}) {
  return agent_exponent_multi(ag, {}, x0, cfg);
}

/// E_{0,B}(k, x0): the same with agent 0 on 0-1 loss. Pass nullptr for k = 0.
inline AgentExponent agent_exponent_01(const AgentModel& ag, const ExpertSummary* ex, const Policy& x0,
                                       const TransformConfig& cfg = {}) {
  const AgentModel b = ag.zero_one();
  AgentExponent e = ex ? agent_exponent(b, *ex, x0, cfg) : agent_exponent_no_expert(b, x0, cfg);
  e.flavor = ExponentFlavor::bayesian01;
  return e;
}

struct AgentSolution {
  Policy policy;
  AgentExponent exponent;
  bool converged = false;
  std::vector<PolicyRun> runs;
  int best_run = -1;

  int max_iterations() const {
    int n = 0;
    for (const PolicyRun& r : runs) n = std::max(n, r.iterations);
    return n;
  }
};

/// Alternates the s-maximizations with an LP over (r, x0) in which every
/// Lambda_ij is linear in x0 at the frozen s. Multistart as for experts.
inline AgentSolution optimize_agent_policy(const AgentModel& ag, const std::vector<ExpertSummary>& experts,
                                           std::vector<Policy> guesses = {},
                                           const AlternatingOptions& opt = {},
                                           const TransformConfig& cfg = {}) {
  const std::size_t n = ag.num_sources();
  if (guesses.empty()) guesses = default_guesses(n);
  for (const Policy& g : guesses) validate_policy(g, n, "initial guess");

  auto evaluate = [&](const Policy& x) {
    AgentExponent e = agent_exponent_multi(ag, experts, x, cfg);
    return std::make_pair(e.value, std::move(e));
  };
  auto cuts = [&](const Policy&, const AgentExponent& e) {
    std::vector<detail::PolicyCut> out;
    for (const InnerTerm& t : e.terms) {
      if (std::isinf(t.value)) continue;
      detail::PolicyCut cut;
      cut.rhs = (1.0 - t.s) * t.a_i + t.s * t.a_j;
      cut.coef = lambda_ij_terms(ag.family, t.i, t.j, t.s);
      out.push_back(std::move(cut));
    }
    return out;
  };

  AgentSolution sol;
  for (const Policy& g : guesses) sol.runs.push_back(detail::run_alternating(g, n, opt, evaluate, cuts));
  const bool any = std::any_of(sol.runs.begin(), sol.runs.end(), [](const PolicyRun& r) { return r.converged; });
  for (std::size_t r = 0; r < sol.runs.size(); ++r) {
    const PolicyRun& run = sol.runs[r];
    if (any && !run.converged) continue;
    if (sol.best_run < 0 || run.exponent > sol.runs[static_cast<std::size_t>(sol.best_run)].exponent)
      sol.best_run = static_cast<int>(r);
  }
  const PolicyRun& best = sol.runs[static_cast<std::size_t>(sol.best_run)];
  sol.policy = best.policy;
  sol.converged = best.converged;
  sol.exponent = agent_exponent_multi(ag, experts, sol.policy, cfg);
  return sol;
}

struct InequalityAudit {
  double general = 0.0;       // E_0(k, x0)
  double general01 = 0.0;     // E_{0,B}(k, x0)
  double no_expert = 0.0;     // E_0(0, x0)
  double no_expert01 = 0.0;   // E_{0,B}(0, x0)

  double min_slack() const {
    return std::min({general - general01, general - no_expert, no_expert - no_expert01});
  }
  bool holds(double tol = 1e-9) const { return min_slack() >= -tol; }
};

inline InequalityAudit audit_inequalities(const AgentModel& ag, const ExpertSummary& ex, const Policy& x0,
                                       const TransformConfig& cfg = {}) {
  InequalityAudit a;
  a.general = agent_exponent(ag, ex, x0, cfg).value;
  a.general01 = agent_exponent_01(ag, &ex, x0, cfg).value;
  a.no_expert = agent_exponent_no_expert(ag, x0, cfg).value;
  a.no_expert01 = agent_exponent_01(ag, nullptr, x0, cfg).value;
  return a;
}

struct ExpertChoice {
  int expert = 0;
  ExpertSolution expert_solution;
  ExpertSummary summary;
  AgentSolution agent;  // agent.policy is the fixed x0 when one was given
  InequalityAudit audit;
};

struct SelectionReport {
  std::vector<ExpertChoice> experts;
  int chosen = 0;
  std::size_t chosen_index = 0;
  AgentSolution baseline;        // max over x0 of E_0(0, x0)
  double baseline01 = 0.0;       // E_{0,B}(0, x0) at the baseline policy
  bool audit_ok = true;
};

struct SelectionOptions {
  std::optional<Policy> fixed_agent_policy;  // evaluate instead of optimizing x0
  std::vector<Policy> expert_guesses;        // empty: defaults
  std::vector<Policy> agent_guesses;
  AlternatingOptions alternating;
  TransformConfig transform;
  RegionOptions regions;
};

/// For every expert: its optimal policy, then agent 0's best E_0 against it.
/// The expert with the largest value is chosen (lowest id on ties).
inline SelectionReport choose_expert(const Scenario& sc, const SelectionOptions& opt = {}) {
  const AgentModel ag(sc);
  SelectionReport rep;
  for (const Expert& e : sc.experts) {
    const ExpertModel em(sc, e.id, opt.regions);
    ExpertChoice ch;
    ch.expert = e.id;
    ch.expert_solution = optimize_expert_alternating(em, opt.expert_guesses, opt.alternating, opt.transform);
    ch.summary = ExpertSummary::from(em, ch.expert_solution.probability);
    if (opt.fixed_agent_policy) {
      ch.agent.policy = *opt.fixed_agent_policy;
      ch.agent.exponent = agent_exponent(ag, ch.summary, ch.agent.policy, opt.transform);
      ch.agent.converged = true;
    } else {
      ch.agent = optimize_agent_policy(ag, {ch.summary}, opt.agent_guesses, opt.alternating, opt.transform);
    }
    ch.audit = audit_inequalities(ag, ch.summary, ch.agent.policy, opt.transform);
    rep.audit_ok = rep.audit_ok && ch.audit.holds();
    rep.experts.push_back(std::move(ch));
  }
  for (std::size_t k = 0; k < rep.experts.size(); ++k)
    if (rep.experts[k].agent.exponent.value > rep.experts[rep.chosen_index].agent.exponent.value)
      rep.chosen_index = k;
  if (!rep.experts.empty()) rep.chosen = rep.experts[rep.chosen_index].expert;
  if (opt.fixed_agent_policy) {
    rep.baseline.policy = *opt.fixed_agent_policy;
    rep.baseline.exponent = agent_exponent_no_expert(ag, rep.baseline.policy, opt.transform);
    rep.baseline.converged = true;
  } else {
    rep.baseline = optimize_agent_policy(ag, {}, opt.agent_guesses, opt.alternating, opt.transform);
  }
  rep.baseline01 = agent_exponent_01(ag, nullptr, rep.baseline.policy, opt.transform).value;
  return rep;
}

/// Lambda_ij(s, x0) - (1-s) c_0(i) - s c_0(j).
inline double loss_augmented_lambda(const AgentModel& ag, std::size_t i, std::size_t j, const Policy& x0,
                                    double s) {
  return lambda_ij(ag.family, i, j, x0, s) - (1.0 - s) * ag.rates[i] - s * ag.rates[j];
}

struct PairMinimum {
  std::size_t i = 0, j = 0;
  double value = 0.0;  // min_{s in [0,1]} of the loss-augmented Lambda
  double s = 0.5;
};

struct NeutralityCheck {
  bool neutral = false;
  std::vector<PairMinimum> pairs;
  double spread = 0.0;  // max minus min over pairs
};

inline NeutralityCheck is_hypothesis_loss_neutral(const AgentModel& ag, const Policy& x0, double tol = 1e-6,
                                                  const TransformConfig& cfg = {}) {
  NeutralityCheck out;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < ag.hypotheses(); ++i)
    for (std::size_t j = i + 1; j < ag.hypotheses(); ++j) {
      const ScalarOptimum o = golden_section_minimize(
          [&](double s) { return loss_augmented_lambda(ag, i, j, x0, s); }, 0.0, 1.0, cfg.golden_tolerance);
      out.pairs.push_back({i, j, o.value, o.argument});
      lo = std::min(lo, o.value);
      hi = std::max(hi, o.value);
    }
  out.spread = hi - lo;
  out.neutral = out.spread <= tol;
  return out;
}

struct SmallDecisionCheck {
  double lhs = 0.0;  // E_0(k, x0)
  double rhs = 0.0;  // E_0(0, x0) with the agent's own rates
  double gap = 0.0;
  bool neutral = false;
  bool equal = false;
};

/// An expert with fewer decisions than hypotheses adds nothing when x0 is
/// hypothesis-loss neutral. Both sides are computed independently.
inline SmallDecisionCheck check_small_expert(const AgentModel& ag, const ExpertSummary& ex, const Policy& x0,
                                             double tol = 1e-6, const TransformConfig& cfg = {}) {
  if (ex.decisions >= ag.hypotheses())
    throw ValidationError("expert.d", "requires fewer decisions than hypotheses");
  SmallDecisionCheck out;
  out.neutral = is_hypothesis_loss_neutral(ag, x0, tol, cfg).neutral;
  out.lhs = agent_exponent(ag, ex, x0, cfg).value;
  out.rhs = agent_exponent_no_expert(ag, x0, cfg).value;
  out.gap = out.lhs - out.rhs;
  out.equal = std::abs(out.gap) <= tol;
  return out;
}

struct OrderedPairTerm {
  std::size_t i = 0, j = 0;
  double rate = 0.0;  // Lambda*_ji(c_k(i) - c_k(j), x_k)
  double s = 0.5;
  double value = 0.0;
};

struct RateGapExponent {
  double value = 0.0;
  std::vector<OrderedPairTerm> pairs;
};

/// The equal-decision-space form: min over ordered pairs of
/// max_s { s q Lambda*_ji(c_k(i) - c_k(j), x_k) - Lambda_bar_ij(s, x0) }.
inline RateGapExponent agent_exponent_rate_gap(const AgentModel& ag, const Expert& ex,
                                                  const LlrFamily& expert_family, const Policy& xk,
                                                  const Policy& x0, const TransformConfig& cfg = {}) {
  const auto ck = ex.loss.diagonal_free_rates();
  if (!ck || ex.decisions() != ag.hypotheses())
    throw ValidationError("expert.loss", "requires d = M with c(m,m) = inf and c(m,d) = c(m)");
  validate_policy(x0, ag.num_sources(), "agent0 policy");
  RateGapExponent out;
  out.value = kInf;
  for (std::size_t i = 0; i < ag.hypotheses(); ++i)
    for (std::size_t j = 0; j < ag.hypotheses(); ++j) {
      if (i == j) continue;
      OrderedPairTerm t{i, j, 0.0, 0.5, 0.0};
      t.rate = lambda_star(expert_family, j, i, xk, (*ck)[i] - (*ck)[j], cfg).value;
      if (std::isinf(t.rate)) {
        t.s = 1.0;
        t.value = kInf;
      } else {
        const ScalarOptimum o = golden_section_maximize(
            [&](double s) { return s * ex.q * t.rate - loss_augmented_lambda(ag, i, j, x0, s); }, 0.0, 1.0,
            cfg.golden_tolerance);
        t.s = o.argument;
        t.value = o.value;
      }
      out.value = std::min(out.value, t.value);
      out.pairs.push_back(t);
    }
  return out;
}

struct ZeroOneExpertAudit {
  bool symmetric_pairs = false;  // Lambda_ij = Lambda_ji on an s-grid for every pair
  std::vector<int> expert_ids;
  std::vector<bool> zero_one;
  std::vector<double> values;    // rate-gap exponent per expert at its policy
  std::vector<double> general;   // E_0 from the region infima, same policies
  int best = 0;
  bool passes = false;           // a 0-1 expert attains the maximum rate-gap exponent
  bool passes_general = false;   // the same on the region-infimum exponent
};

/// With agent 0 on 0-1 loss and symmetric pairwise Lambda, an expert on 0-1
/// loss should attain the best rate-gap exponent.
inline ZeroOneExpertAudit audit_zero_one_expert(const Scenario& sc, const std::vector<Policy>& expert_policies,
                                                const Policy& x0, const TransformConfig& cfg = {}) {
  const AgentModel ag = AgentModel(sc).zero_one();
  ZeroOneExpertAudit a;
  a.symmetric_pairs = true;
  for (std::size_t i = 0; i < ag.hypotheses(); ++i)
    for (std::size_t j = i + 1; j < ag.hypotheses(); ++j)
      for (int g = 0; g <= 100; ++g) {
        const double s = g / 100.0;
        if (std::abs(lambda_ij(ag.family, i, j, x0, s) - lambda_ij(ag.family, j, i, x0, s)) > 1e-12)
          a.symmetric_pairs = false;
      }
  double best = -kInf;
  for (std::size_t k = 0; k < sc.experts.size(); ++k) {
    const Expert& e = sc.experts[k];
    const LlrFamily fam(sc, e.sources);
    const double v = agent_exponent_rate_gap(ag, e, fam, expert_policies.at(k), x0, cfg).value;
    const ExpertModel em(sc, e.id);
    const ExpertSummary sum = ExpertSummary::from(em, probability_exponents(em, expert_policies.at(k), cfg));
    a.general.push_back(agent_exponent(ag, sum, x0, cfg).value);
    const auto rates = e.loss.diagonal_free_rates();
    const bool zo = rates && std::all_of(rates->begin(), rates->end(), [](double c) { return c == 0.0; });
    a.expert_ids.push_back(e.id);
    a.zero_one.push_back(zo);
    a.values.push_back(v);
    if (v > best) {
      best = v;
      a.best = e.id;
    }
  }
  const double best_general = a.general.empty() ? kInf : *std::max_element(a.general.begin(), a.general.end());
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    if (a.zero_one[k] && a.values[k] >= best - 1e-9) a.passes = true;
    if (a.zero_one[k] && a.general[k] >= best_general - 1e-9) a.passes_general = true;
  }
  return a;
}

}  // namespace exponentlab
