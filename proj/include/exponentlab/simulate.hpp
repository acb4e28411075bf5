#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "exponentlab/agent_opt.hpp"
#include "exponentlab/expert_opt.hpp"
#include "exponentlab/regions.hpp"
#include "exponentlab/rng.hpp"

namespace exponentlab {

struct SimConfig {
  std::vector<int> sample_sizes;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: EXPONENTLAB_THREADS or hardware concurrency

  void validate() const {
    if (trials < 1) throw ValidationError("sim.trials", "must be >= 1");
    if (sample_sizes.empty()) throw ValidationError("sim.n", "need at least one sample size");
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
      if (sample_sizes[i] < 1) throw ValidationError("sim.n", "sample sizes must be >= 1");
      if (i && sample_sizes[i] <= sample_sizes[i - 1])
        throw ValidationError("sim.n", "sample sizes must be increasing");
    }
  }
};

inline unsigned worker_count(unsigned requested) {
  unsigned n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("EXPONENTLAB_THREADS")) {
      const long cap = std::strtol(env, nullptr, 10);
      if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    }
  }
  return std::max(1u, n);
}

struct SlopePoint {
  int n = 0;
  double log_value = 0.0;  // log frequency, or the log(1/trials) bound when censored
  double variance = 0.0;   // delta-method variance of log_value
  bool censored = false;
};

struct SlopeEstimate {
  double slope = 0.0;  // d log P / dn; the exponent estimate is -slope
  double standard_error = 0.0;
  std::vector<SlopePoint> points;
  std::vector<std::size_t> used;
  bool valid = false;

  double exponent() const { return -slope; }
};

/// Least squares of log value on n over the uncensored points in the upper
/// half of the grid. Needs at least 3 such points.
inline SlopeEstimate fit_slope(std::vector<SlopePoint> points) {
  SlopeEstimate est;
  est.points = std::move(points);
  const std::size_t first = est.points.size() / 2;
  for (std::size_t i = first; i < est.points.size(); ++i)
    if (!est.points[i].censored) est.used.push_back(i);
  if (est.used.size() < 3) return est;
  double nbar = 0.0, ybar = 0.0;
  for (std::size_t i : est.used) {
    nbar += est.points[i].n;
    ybar += est.points[i].log_value;
  }
  nbar /= static_cast<double>(est.used.size());
  ybar /= static_cast<double>(est.used.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i : est.used) {
    const double dx = est.points[i].n - nbar;
    sxx += dx * dx;
    sxy += dx * (est.points[i].log_value - ybar);
  }
  est.slope = sxy / sxx;
  double var = 0.0;
  for (std::size_t i : est.used) {
    const double w = (est.points[i].n - nbar) / sxx;
    var += w * w * est.points[i].variance;
  }
  est.standard_error = std::sqrt(var);
  est.valid = true;
  return est;
}

namespace detail {

// Draws the summed log-likelihood-ratio vector of k observations of one source.
class SourceSampler {
 public:
  explicit SourceSampler(const LlrModel& model) : model_(&model) {
    if (model.kind() == SourceKind::finite) {
      const Mat& lp = model.log_probabilities();
      cdf_.resize(static_cast<std::size_t>(lp.rows()));
      for (Eigen::Index m = 0; m < lp.rows(); ++m) {
        double acc = 0.0;
        for (Eigen::Index y = 0; y < lp.cols(); ++y) {
          acc += std::exp(lp(m, y));
          cdf_[static_cast<std::size_t>(m)].push_back(acc);
        }
      }
    }
  }

  void add(std::size_t m, long k, Xoshiro256& rng, Vec& llr) const {
    if (k <= 0) return;
    const double kd = static_cast<double>(k);
    if (model_->kind() == SourceKind::gaussian) {
      // The sum of k draws is sufficient for the likelihood ratio.
      const double sum = kd * model_->means()[m] + std::sqrt(kd * model_->variance()) * rng.normal();
      llr += model_->gaussian_slope() * sum + model_->gaussian_offset() * kd;
      return;
    }
    const auto& cdf = cdf_[m];
    for (long r = 0; r < k; ++r) {
      const double u = rng.uniform() * cdf.back();
      const auto y = static_cast<Eigen::Index>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
      llr += model_->llr_table().row(y).transpose();
    }
  }

 private:
  const LlrModel* model_;
  std::vector<std::vector<double>> cdf_;
};

// floor(x[g] n) observations per source; the remainder goes to source 0 and
// is drawn but left out of the statistic.
inline std::vector<long> allocate(const Policy& x, int n, long& leftover) {
  std::vector<long> k(x.size());
  long used = 0;
  for (std::size_t g = 0; g < x.size(); ++g) {
    k[g] = static_cast<long>(std::floor(x[g] * n + 1e-9));
    used += k[g];
  }
  leftover = n - used;
  return k;
}

class PolicySampler {
 public:
  PolicySampler(const LlrFamily& fam, const Policy& x, int n) : dim_(fam.dim()) {
    for (const LlrModel& m : fam.models) samplers_.emplace_back(m);
    counts_ = allocate(x, n, leftover_);
  }

  /// Summed log-likelihood ratios log l_{m0}, m = 1..M-1, under hypothesis h.
  Vec draw(std::size_t h, Xoshiro256& rng) const {
    Vec llr = Vec::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t g = 0; g < samplers_.size(); ++g) samplers_[g].add(h, counts_[g], rng, llr);
    if (leftover_ > 0) {
      Vec discard = Vec::Zero(static_cast<Eigen::Index>(dim_));
      samplers_.front().add(h, leftover_, rng, discard);
    }
    return llr;
  }

 private:
  std::size_t dim_;
  std::vector<SourceSampler> samplers_;
  std::vector<long> counts_;
  long leftover_ = 0;
};

// Bayes rule argmin_d sum_m pi_m C(m,d,n) l_{m0}; lowest d wins exact ties.
inline std::size_t bayes_decision(const LogLossMatrix& logc, const std::vector<double>& log_priors,
                                  const Vec& llr, bool& tie) {
  std::size_t best = 0;
  double best_v = kInf;
  tie = false;
  Vec e(static_cast<Eigen::Index>(logc.hypotheses()));
  for (std::size_t d = 0; d < logc.decisions(); ++d) {
    for (std::size_t m = 0; m < logc.hypotheses(); ++m)
      e[static_cast<Eigen::Index>(m)] = log_priors[m] + logc.at(m, d) + (m ? llr[static_cast<Eigen::Index>(m - 1)] : 0.0);
    const double v = LlrModel::log_sum_exp(e);
    if (v < best_v) {
      best_v = v;
      best = d;
      tie = false;
    } else if (v == best_v) {
      tie = true;
    }
  }
  return best;
}

// Runs body(trial, local) over [0, trials) split into contiguous blocks, one
// local accumulator per worker, then sums them. Exact integer merges make
// the result independent of the worker count.
template <class Acc, class Body>
Acc parallel_trials(std::uint64_t trials, unsigned workers, const Acc& zero, Body&& body) {
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, trials));
  std::vector<Acc> locals(workers, zero);
  auto work = [&](unsigned w) {
    const std::uint64_t lo = trials * w / workers, hi = trials * (w + 1) / workers;
    for (std::uint64_t t = lo; t < hi; ++t) body(t, locals[w]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  Acc total = zero;
  for (const Acc& a : locals) total += a;
  return total;
}

struct CountTable {
  std::vector<std::uint64_t> cells;
  std::uint64_t ties = 0;

  CountTable& operator+=(const CountTable& o) {
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] += o.cells[i];
    ties += o.ties;
    return *this;
  }
};

// log sum_m pi_m sum_d w(m,d) p(m,d) with its delta-method variance.
inline SlopePoint loss_point(int n, const std::vector<double>& priors, const std::vector<std::uint64_t>& counts,
                             std::size_t decisions, std::uint64_t trials, const LogLossMatrix& logc) {
  const double N = static_cast<double>(trials);
  double value = 0.0, var = 0.0;
  for (std::size_t m = 0; m < priors.size(); ++m) {
    double first = 0.0, second = 0.0;
    for (std::size_t d = 0; d < decisions; ++d) {
      const double p = static_cast<double>(counts[m * decisions + d]) / N;
      const double w = std::exp(logc.at(m, d));
      first += w * p;
      second += w * w * p;
    }
    value += priors[m] * first;
    var += priors[m] * priors[m] * (second - first * first) / N;
  }
  SlopePoint pt;
  pt.n = n;
  if (value <= 0.0) {
    double wmax = 0.0;
    for (std::size_t m = 0; m < priors.size(); ++m)
      for (std::size_t d = 0; d < decisions; ++d)
        if (logc.at(m, d) > -kInf) wmax = std::max(wmax, priors[m] * std::exp(logc.at(m, d)));
    pt.censored = true;
    pt.log_value = std::log(wmax / N);
    return pt;
  }
  pt.log_value = std::log(value);
  pt.variance = var / (value * value);
  return pt;
}

inline SlopePoint frequency_point(int n, std::uint64_t count, std::uint64_t trials) {
  SlopePoint pt;
  pt.n = n;
  const double N = static_cast<double>(trials);
  if (count == 0) {
    pt.censored = true;
    pt.log_value = -std::log(N);
    return pt;
  }
  const double p = static_cast<double>(count) / N;
  pt.log_value = std::log(p);
  pt.variance = (1.0 - p) / (N * p);
  return pt;
}

}  // namespace detail

struct ExpertSimResult {
  int expert = 0;
  Policy policy;
  SimConfig config;
  std::size_t hypotheses = 0, decisions = 0;
  std::vector<std::vector<std::uint64_t>> counts;  // per n: hypotheses x decisions
  std::vector<std::uint64_t> ties;                 // per n
  std::vector<SlopeEstimate> cells;                // per (m, d): log P_m(D = d)
  SlopeEstimate loss;                              // log E C(H, D, n)

  std::uint64_t count(std::size_t ni, std::size_t m, std::size_t d) const {
    return counts.at(ni).at(m * decisions + d);
  }
};

inline constexpr std::uint64_t kExpertStream = 1;
inline constexpr std::uint64_t kAgentStream = 0;

/// Monte Carlo of the expert's finite-n Bayes rule at policy x.
inline ExpertSimResult simulate_expert(const Scenario& sc, const ExpertModel& em, const Policy& x,
                                       const SimConfig& cfg) {
  cfg.validate();
  validate_policy(x, em.num_sources());
  const std::size_t M = em.hypotheses(), D = em.decisions();
  std::vector<double> log_priors;
  for (double p : sc.priors) log_priors.push_back(std::log(p));

  ExpertSimResult res;
  res.expert = em.expert.id;
  res.policy = x;
  res.config = cfg;
  res.hypotheses = M;
  res.decisions = D;
  const unsigned workers = worker_count(cfg.threads);
  std::vector<SlopePoint> loss_pts;
  std::vector<std::vector<SlopePoint>> cell_pts(M * D);
  for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
    const int n = cfg.sample_sizes[ni];
    const detail::PolicySampler sampler(em.family, x, n);
    const LogLossMatrix logc = LogLossMatrix::exponential(em.expert.loss, n);
    detail::CountTable zero{std::vector<std::uint64_t>(M * D, 0), 0};
    detail::CountTable total = zero;
    for (std::size_t h = 0; h < M; ++h) {
      total += detail::parallel_trials(cfg.trials, workers, zero, [&](std::uint64_t t, detail::CountTable& acc) {
        Xoshiro256 rng(stream_key({cfg.seed, ni, h, t, kExpertStream}));
        bool tie = false;
        const std::size_t d = detail::bayes_decision(logc, log_priors, sampler.draw(h, rng), tie);
        ++acc.cells[h * D + d];
        if (tie) ++acc.ties;
      });
    }
    res.counts.push_back(total.cells);
    res.ties.push_back(total.ties);
    for (std::size_t c = 0; c < M * D; ++c) cell_pts[c].push_back(detail::frequency_point(n, total.cells[c], cfg.trials));
    loss_pts.push_back(detail::loss_point(n, sc.priors, total.cells, D, cfg.trials, logc));
  }
  for (auto& pts : cell_pts) res.cells.push_back(fit_slope(std::move(pts)));
  res.loss = fit_slope(std::move(loss_pts));
  return res;
}

struct AgentSimResult {
  int expert = 0;  // 0: agent 0 alone
  Policy agent_policy, expert_policy;
  SimConfig config;
  std::size_t hypotheses = 0;
  std::vector<std::vector<std::uint64_t>> counts;  // per n: true hypothesis x declared hypothesis
  std::vector<std::uint64_t> fallbacks;            // per n: trials with several maximal scores
  SlopeEstimate loss;

  double fallback_rate(std::size_t ni) const {
    return static_cast<double>(fallbacks.at(ni)) / (static_cast<double>(config.trials) * static_cast<double>(hypotheses));
  }
};

/// Agent 0 with the pairwise threshold rule: declare i iff
/// (1/n) log l_ji <= h_ji for every j, h_ji = -q a_i + q a_j - c0(i) + c0(j),
/// where a_m = inf_{A(d)} Phi*_m for the expert's decision d. The surviving
/// i is the maximizer of (1/n) log p_i - q a_i - c0(i); exact ties fall back
/// to the lowest index and are counted.
///
/// With expert == nullptr agent 0 ignores experts (q = 0).
inline AgentSimResult simulate_agent0(const Scenario& sc, const Policy& x0, const ExpertModel* expert,
                                      const Policy* expert_policy, const ExpertSummary* summary,
                                      const SimConfig& cfg) {
  cfg.validate();
  const AgentModel ag(sc);
  validate_policy(x0, ag.num_sources(), "agent0 policy");
  const std::size_t M = ag.hypotheses();
  if (expert && (!expert_policy || !summary))
    throw std::invalid_argument("simulate_agent0: expert needs a policy and exponent summary");
  std::vector<double> log_priors;
  for (double p : sc.priors) log_priors.push_back(std::log(p));

  AgentSimResult res;
  res.expert = expert ? expert->expert.id : 0;
  res.agent_policy = x0;
  if (expert_policy) res.expert_policy = *expert_policy;
  res.config = cfg;
  res.hypotheses = M;
  const unsigned workers = worker_count(cfg.threads);
  const LossSpec& l0 = sc.agent0.loss;
  std::vector<SlopePoint> loss_pts;
  for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
    const int n0 = cfg.sample_sizes[ni];
    const detail::PolicySampler agent_sampler(ag.family, x0, n0);
    int nk = 0;
    std::optional<detail::PolicySampler> expert_sampler;
    std::optional<LogLossMatrix> expert_logc;
    if (expert) {
      nk = static_cast<int>(std::lround(expert->expert.q * n0));
      if (nk < 1) throw ValidationError("sim.n", "expert sample size rounds to zero");
      expert_sampler.emplace(expert->family, *expert_policy, nk);
      expert_logc.emplace(LogLossMatrix::exponential(expert->expert.loss, nk));
    }
    const double q = expert ? expert->expert.q : 0.0;
    detail::CountTable zero{std::vector<std::uint64_t>(M * M, 0), 0};
    detail::CountTable total = zero;
    for (std::size_t h = 0; h < M; ++h) {
      total += detail::parallel_trials(cfg.trials, workers, zero, [&](std::uint64_t t, detail::CountTable& acc) {
        std::size_t d = 0;
        if (expert) {
          Xoshiro256 er(stream_key({cfg.seed, ni, h, t, kExpertStream}));
          bool tie = false;
          d = detail::bayes_decision(*expert_logc, log_priors, expert_sampler->draw(h, er), tie);
        }
        Xoshiro256 ar(stream_key({cfg.seed, ni, h, t, kAgentStream}));
        const Vec llr = agent_sampler.draw(h, ar);
        std::size_t best = 0;
        double best_v = -kInf;
        bool several = false;
        for (std::size_t i = 0; i < M; ++i) {
          const double a = expert ? summary->at(i, d) : 0.0;
          const double v = (i ? llr[static_cast<Eigen::Index>(i - 1)] : 0.0) / n0 -
                           detail::weighted_term(q, a) - ag.rates[i];
          if (v > best_v) {
            best_v = v;
            best = i;
            several = false;
          } else if (v == best_v) {
            several = true;
          }
        }
        ++acc.cells[h * M + best];
        if (several) ++acc.ties;
      });
    }
    res.counts.push_back(total.cells);
    res.fallbacks.push_back(total.ties);
    LogLossMatrix logc(M, M);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t e = 0; e < M; ++e)
        logc.at(m, e) = l0.at(m, e).is_infinite() ? -kInf : -n0 * l0.at(m, e).value();
    loss_pts.push_back(detail::loss_point(n0, sc.priors, total.cells, M, cfg.trials, logc));
  }
  res.loss = fit_slope(std::move(loss_pts));
  return res;
}

struct ConvergenceRow {
  int n = 0;
  double sup_gap = 0.0;
  double bound = 0.0;
  bool within = false;
};

struct ConvergenceCheck {
  std::vector<ConvergenceRow> rows;
  bool monotone = false;
  bool passes = false;
};

/// sup over sampled z in [-1,1]^{M-1} of |g(z,d,n) - f(z,d)| over all d.
inline ConvergenceCheck verify_uniform_convergence(const LossSpec& loss, const std::vector<double>& priors,
                                                   const std::vector<int>& ns, std::size_t samples,
                                                   std::uint64_t seed) {
  const std::size_t M = loss.hypotheses();
  double max_log_prior = 0.0;
  for (double p : priors) max_log_prior = std::max(max_log_prior, std::abs(std::log(p)));
  ConvergenceCheck out;
  out.monotone = true;
  out.passes = true;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    const double n = ns[ni];
    const LogLossMatrix logc = LogLossMatrix::exponential(loss, n);
    Xoshiro256 rng(stream_key({seed, 0x6c656d6d61ULL}));  // same z sample for every n
    ConvergenceRow row;
    row.n = ns[ni];
    for (std::size_t s = 0; s < samples; ++s) {
      Vec z(static_cast<Eigen::Index>(M - 1));
      for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = 2.0 * rng.uniform() - 1.0;
      const Vec z0 = lift(z);
      for (std::size_t d = 0; d < loss.decisions(); ++d) {
        const double f = f_decision(loss, z0, d);
        const double g = g_decision(logc, priors, z0, d, n);
        row.sup_gap = std::max(row.sup_gap, std::abs(g - f));
      }
    }
    row.bound = (std::log(static_cast<double>(M)) + max_log_prior) / n + 1e-9;
    row.within = row.sup_gap <= row.bound;
    out.passes = out.passes && row.within;
    if (ni && !(row.sup_gap < out.rows.back().sup_gap)) out.monotone = false;
    out.rows.push_back(row);
  }
  out.passes = out.passes && out.monotone;
  return out;
}

}  // namespace exponentlab
