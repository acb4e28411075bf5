#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "exponentlab/lp.hpp"
#include "exponentlab/regions.hpp"
#include "exponentlab/scenario.hpp"

namespace exponentlab {

/// Everything about one expert that does not depend on its policy.
struct ExpertModel {
  Expert expert;
  LlrFamily family;
  RegionSet regions;

  ExpertModel(const Scenario& sc, int id, const RegionOptions& opt = {})
      : expert(sc.expert(id)), family(sc, expert.sources), regions(build_regions(expert.loss, opt)) {}

  std::size_t hypotheses() const { return expert.loss.hypotheses(); }
  std::size_t decisions() const { return expert.loss.decisions(); }
  std::size_t num_sources() const { return family.size(); }
};

/// inf_{A(d)} Phi*_m(., x) for every (m, d), with minimizers and tilts.
struct ExponentMatrix {
  std::size_t hypotheses = 0, decisions = 0;
  std::vector<RegionInfimum> cells;

  const RegionInfimum& cell(std::size_t m, std::size_t d) const { return cells.at(m * decisions + d); }
  double operator()(std::size_t m, std::size_t d) const { return cell(m, d).value; }
  bool converged() const {
    return std::all_of(cells.begin(), cells.end(), [](const RegionInfimum& c) { return c.converged; });
  }
};

struct ExpertEvaluation {
  double exponent = 0.0;  // I_k(x)
  ExponentMatrix probability;
  std::size_t argmin_m = 0, argmin_d = 0;
};

inline ExponentMatrix probability_exponents(const ExpertModel& em, const Policy& x,
                                            const TransformConfig& cfg = {}) {
  validate_policy(x, em.num_sources());
  ExponentMatrix out;
  out.hypotheses = em.hypotheses();
  out.decisions = em.decisions();
  out.cells.reserve(out.hypotheses * out.decisions);
  for (std::size_t m = 0; m < out.hypotheses; ++m)
    for (std::size_t d = 0; d < out.decisions; ++d)
      out.cells.push_back(inf_rate_over_region(em.family, m, x, em.expert.loss, d, em.regions, cfg));
  return out;
}

/// I_k(x) = min_{m,d} { inf_{A(d)} Phi*_m(., x) + c(m, d) } over finite rates.
inline ExpertEvaluation expert_exponent(const ExpertModel& em, const Policy& x,
                                        const TransformConfig& cfg = {}) {
  ExpertEvaluation ev;
  ev.probability = probability_exponents(em, x, cfg);
  ev.exponent = kInf;
  for (std::size_t m = 0; m < em.hypotheses(); ++m)
    for (std::size_t d = 0; d < em.decisions(); ++d) {
      const LossRate c = em.expert.loss.at(m, d);
      if (c.is_infinite()) continue;
      const double v = ev.probability(m, d) + c.value();
      if (v < ev.exponent) {
        ev.exponent = v;
        ev.argmin_m = m;
        ev.argmin_d = d;
      }
    }
  return ev;
}

struct TraceRow {
  int iteration = 0;
  Policy policy;
  double exponent = 0.0;
};

struct PolicyRun {
  Policy initial;
  Policy policy;
  double exponent = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<TraceRow> trace;
};

struct ExpertSolution {
  Policy policy;
  double exponent = 0.0;
  ExponentMatrix probability;
  bool converged = false;
  std::vector<PolicyRun> runs;  // one per initial guess, in guess order
  int best_run = -1;

  int total_iterations() const {
    int n = 0;
    for (const PolicyRun& r : runs) n += r.iterations;
    return n;
  }
};

struct AlternatingOptions {
  double tolerance = 1e-6;  // on the sup-norm policy change
  int max_iterations = 100;
};

/// The simplex vertices followed by the barycenter.
inline std::vector<Policy> default_guesses(std::size_t n) {
  std::vector<Policy> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Policy::vertex(n, i));
  if (n > 1) out.push_back(Policy::barycenter(n));
  return out;
}

namespace detail {

// Clears LP round-off so the policy lies exactly on the simplex.
inline Policy clean_policy(const std::vector<double>& w, std::size_t n) {
  Policy x{std::vector<double>(w.begin(), w.begin() + static_cast<long>(n))};
  double sum = 0.0;
  for (double& v : x.weights) {
    if (v < 1e-14) v = 0.0;
    sum += v;
  }
  for (double& v : x.weights) v /= sum;
  return x;
}

inline double policy_distance(const Policy& a, const Policy& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// max r s.t. r <= rhs_c - <coef_c, x> for every cut c, x on the simplex.
struct PolicyCut {
  std::vector<double> coef;
  double rhs = 0.0;
};

inline Policy solve_policy_lp(const std::vector<PolicyCut>& cuts, std::size_t n) {
  LinearProgram lp(n + 1);
  lp.set_free(n);
  std::vector<double> obj(n + 1, 0.0);
  obj[n] = 1.0;
  lp.set_objective(obj);
  for (const PolicyCut& c : cuts) {
    std::vector<double> a = c.coef;
    a.push_back(1.0);
    lp.add_le(a, c.rhs);
  }
  std::vector<double> ones(n + 1, 1.0);
  ones[n] = 0.0;
  lp.add_eq(ones, 1.0);
  const LpResult r = lp.solve();
  if (r.status != LpStatus::optimal)
    throw std::logic_error("policy LP is not solvable; the cut set is malformed");
  return clean_policy(r.x, n);
}

template <class Evaluate, class Cuts>
PolicyRun run_alternating(const Policy& guess, std::size_t n, const AlternatingOptions& opt,
                          Evaluate&& evaluate, Cuts&& cuts) {
  PolicyRun run;
  run.initial = guess;
  Policy x = guess;
  auto state = evaluate(x);
  run.trace.push_back({0, x, state.first});
  for (int l = 1; l <= opt.max_iterations; ++l) {
    const Policy next = solve_policy_lp(cuts(x, state.second), n);
    const double step = policy_distance(next, x);
    x = next;
    state = evaluate(x);
    run.trace.push_back({l, x, state.first});
    run.iterations = l;
    if (step <= opt.tolerance) {
      run.converged = true;
      break;
    }
  }
  run.policy = x;
  run.exponent = state.first;
  return run;
}

}  // namespace detail

/// Alternates region minimization (fixing z_{m,d} and its tilt) with an LP
/// over (r, x) on the Fenchel minorants. Returns the best converged run.
inline ExpertSolution optimize_expert_alternating(const ExpertModel& em,
                                                  std::vector<Policy> guesses = {},
                                                  const AlternatingOptions& opt = {},
                                                  const TransformConfig& cfg = {}) {
  const std::size_t n = em.num_sources();
  if (guesses.empty()) guesses = default_guesses(n);
  for (const Policy& g : guesses) validate_policy(g, n, "initial guess");

  auto evaluate = [&](const Policy& x) {
    ExpertEvaluation ev = expert_exponent(em, x, cfg);
    return std::make_pair(ev.exponent, std::move(ev.probability));
  };
  auto cuts = [&](const Policy&, const ExponentMatrix& P) {
    std::vector<detail::PolicyCut> out;
    for (std::size_t m = 0; m < em.hypotheses(); ++m)
      for (std::size_t d = 0; d < em.decisions(); ++d) {
        const LossRate c = em.expert.loss.at(m, d);
        const RegionInfimum& cell = P.cell(m, d);
        if (c.is_infinite() || cell.unreachable) continue;
        detail::PolicyCut cut;
        cut.rhs = cell.tilt.dot(cell.minimizer) + c.value();
        for (std::size_t g = 0; g < n; ++g) cut.coef.push_back(xi(em.family, m, g, cell.tilt));
        out.push_back(std::move(cut));
      }
    return out;
  };

  ExpertSolution sol;
  for (const Policy& g : guesses) sol.runs.push_back(detail::run_alternating(g, n, opt, evaluate, cuts));
  // Best exponent among converged runs; all runs if none converged.
  const bool any = std::any_of(sol.runs.begin(), sol.runs.end(), [](const PolicyRun& r) { return r.converged; });
  for (std::size_t r = 0; r < sol.runs.size(); ++r) {
    const PolicyRun& run = sol.runs[r];
    if (any && !run.converged) continue;
    if (sol.best_run < 0 || run.exponent > sol.runs[static_cast<std::size_t>(sol.best_run)].exponent)
      sol.best_run = static_cast<int>(r);
  }
  const PolicyRun& best = sol.runs[static_cast<std::size_t>(sol.best_run)];
  sol.policy = best.policy;
  sol.exponent = best.exponent;
  sol.converged = best.converged;
  sol.probability = probability_exponents(em, sol.policy, cfg);
  return sol;
}

/// All simplex points with coordinates on multiples of `step`.
inline std::vector<Policy> simplex_grid(std::size_t n, double step) {
  if (!(step > 0.0 && step <= 0.5)) throw ValidationError("grid-step", "must lie in (0, 0.5]");
  const double units_f = 1.0 / step;
  const auto units = static_cast<long>(std::llround(units_f));
  if (std::abs(static_cast<double>(units) - units_f) > 1e-9 * units_f)
    throw ValidationError("grid-step", "1/step must be an integer");
  std::vector<Policy> out;
  std::vector<long> c(n, 0);
  // Enumerate compositions of `units` into n parts in lexicographic order.
  auto rec = [&](auto&& self, std::size_t pos, long left) -> void {
    if (pos + 1 == n) {
      c[pos] = left;
      Policy x{std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) x.weights[i] = static_cast<double>(c[i]) / static_cast<double>(units);
      out.push_back(std::move(x));
      return;
    }
    for (long v = 0; v <= left; ++v) {
      c[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, units);
  return out;
}

/// Exhaustive search of I_k over a simplex grid; the reference for the
/// alternating procedure. The first maximizer in grid order wins ties.
inline ExpertSolution optimize_expert_grid(const ExpertModel& em, double step,
                                           const TransformConfig& cfg = {}) {
  const std::size_t n = em.num_sources();
  if (n > 4) throw ValidationError("expert.sources", "grid search supports at most 4 sources");
  ExpertSolution sol;
  sol.exponent = -kInf;
  PolicyRun run;
  int it = 0;
  for (const Policy& x : simplex_grid(n, step)) {
    const double v = expert_exponent(em, x, cfg).exponent;
    run.trace.push_back({it++, x, v});
    if (v > sol.exponent) {
      sol.exponent = v;
      sol.policy = x;
    }
  }
  run.initial = run.trace.front().policy;
  run.policy = sol.policy;
  run.exponent = sol.exponent;
  run.converged = true;
  run.iterations = it;
  sol.runs.push_back(std::move(run));
  sol.best_run = 0;
  sol.converged = true;
  sol.probability = probability_exponents(em, sol.policy, cfg);
  return sol;
}

}  // namespace exponentlab
