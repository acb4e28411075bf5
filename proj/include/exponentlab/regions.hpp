#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "exponentlab/fenchel.hpp"
#include "exponentlab/loss.hpp"
#include "exponentlab/lp.hpp"
#include "exponentlab/mgf.hpp"

namespace exponentlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// z0 = (0, z): prepends the reference coordinate.
inline Vec lift(const Vec& z) {
  Vec z0(z.size() + 1);
  z0[0] = 0.0;
  z0.tail(z.size()) = z;
  return z0;
}

/// f~(z0, d) = max_m { z0[m] - c(m, d) }; infinite rates drop out.
inline double f_tilde(const LossSpec& loss, const Vec& z0, std::size_t d) {
  double best = -kInf;
  for (std::size_t m = 0; m < loss.hypotheses(); ++m)
    best = std::max(best, subtract_rate(z0[static_cast<Eigen::Index>(m)], loss.at(m, d)));
  return best;
}

/// f(z0, d) = f~(z0, d) - min_{d' != d} f~(z0, d'). Negative iff z is in A(d).
inline double f_decision(const LossSpec& loss, const Vec& z0, std::size_t d) {
  if (loss.decisions() < 2) throw std::invalid_argument("f_decision: need at least 2 decisions");
  double other = kInf;
  for (std::size_t e = 0; e < loss.decisions(); ++e)
    if (e != d) other = std::min(other, f_tilde(loss, z0, e));
  return f_tilde(loss, z0, d) - other;
}

/// log C(m, d, n) for a concrete loss at sample size n; -inf encodes C = 0.
class LogLossMatrix {
 public:
  LogLossMatrix(std::size_t hypotheses, std::size_t decisions)
      : rows_(hypotheses), cols_(decisions), v_(hypotheses * decisions, 0.0) {}

  /// C(m, d, n) = exp(-n c(m, d)).
  static LogLossMatrix exponential(const LossSpec& spec, double n) {
    LogLossMatrix out(spec.hypotheses(), spec.decisions());
    for (std::size_t m = 0; m < spec.hypotheses(); ++m)
      for (std::size_t d = 0; d < spec.decisions(); ++d)
        out.at(m, d) = spec.at(m, d).is_infinite() ? -kInf : -n * spec.at(m, d).value();
    return out;
  }

  std::size_t hypotheses() const { return rows_; }
  std::size_t decisions() const { return cols_; }
  double& at(std::size_t m, std::size_t d) { return v_.at(m * cols_ + d); }
  double at(std::size_t m, std::size_t d) const { return v_.at(m * cols_ + d); }

 private:
  std::size_t rows_, cols_;
  std::vector<double> v_;
};

/// g~(z0, d, n) = (1/n) log sum_m pi_m exp(log C(m, d, n) + n z0[m]).
inline double g_tilde(const LogLossMatrix& logc, const std::vector<double>& priors,
                      const Vec& z0, std::size_t d, double n) {
  Vec e(static_cast<Eigen::Index>(logc.hypotheses()));
  for (std::size_t m = 0; m < logc.hypotheses(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    e[mi] = std::log(priors[m]) + logc.at(m, d) + n * z0[mi];
  }
  return LlrModel::log_sum_exp(e) / n;
}

inline double g_decision(const LogLossMatrix& logc, const std::vector<double>& priors,
                         const Vec& z0, std::size_t d, double n) {
  double other = kInf;
  for (std::size_t e = 0; e < logc.decisions(); ++e)
    if (e != d) other = std::min(other, g_tilde(logc, priors, z0, e, n));
  return g_tilde(logc, priors, z0, d, n) - other;
}

/// B(i,p,j,q) = { z : z0[i] - z0[j] >= c(i,p) - c(j,q) }, z0[0] = 0.
struct Halfspace {
  std::size_t i = 0, p = 0, j = 0, q = 0;
  double rhs = 0.0;  // extended real

  bool whole_space() const { return rhs == -kInf; }
  bool empty() const { return rhs == kInf; }

  /// Coefficients of z0[i] - z0[j] on the free coordinates z = z0[1:].
  std::vector<double> normal(std::size_t dim) const {
    std::vector<double> a(dim, 0.0);
    if (i > 0) a[i - 1] += 1.0;
    if (j > 0) a[j - 1] -= 1.0;
    return a;
  }
  double slack(const Vec& z) const {
    const double zi = i ? z[static_cast<Eigen::Index>(i - 1)] : 0.0;
    const double zj = j ? z[static_cast<Eigen::Index>(j - 1)] : 0.0;
    return zi - zj - rhs;
  }
  bool same_constraint(const Halfspace& o) const {
    return i == o.i && j == o.j && rhs == o.rhs;
  }
};

struct Polyhedron {
  std::vector<std::vector<std::size_t>> sequences;  // (m_p) that generated it; several after merging
  std::vector<Halfspace> halfspaces;

  /// Closure membership with tolerance band.
  bool contains(const Vec& z, double band = 0.0) const {
    for (const Halfspace& h : halfspaces)
      if (h.slack(z) < -band) return false;
    return true;
  }
  /// Interior membership: every constraint holds with margin.
  bool contains_strictly(const Vec& z, double margin = 0.0) const {
    for (const Halfspace& h : halfspaces)
      if (!(h.slack(z) > margin)) return false;
    return true;
  }
};

struct RegionSet {
  std::size_t hypotheses = 0;
  std::vector<std::vector<Polyhedron>> regions;  // indexed by decision

  std::size_t decisions() const { return regions.size(); }
  std::size_t dim() const { return hypotheses - 1; }
  const std::vector<Polyhedron>& operator[](std::size_t d) const { return regions.at(d); }

  /// Decision whose region holds z strictly, if any.
  std::optional<std::size_t> locate(const Vec& z, double margin = 0.0) const {
    for (std::size_t d = 0; d < regions.size(); ++d)
      for (const Polyhedron& P : regions[d])
        if (P.contains_strictly(z, margin)) return d;
    return std::nullopt;
  }
};

struct RegionOptions {
  std::size_t enumeration_cap = 1'000'000;
  double feasibility_slack = 1e-9;
  double redundancy_tolerance = 1e-12;
  bool merge = true;
};

namespace detail {

// max eps s.t. every halfspace holds with margin eps (eps <= 1), plus
// optional constraints that must be violated by eps.
inline double interior_margin(const std::vector<Halfspace>& keep,
                              const std::vector<const Halfspace*>& violate, std::size_t dim) {
  LinearProgram lp(dim + 1);
  for (std::size_t v = 0; v < dim; ++v) lp.set_free(v);
  std::vector<double> obj(dim + 1, 0.0);
  obj[dim] = 1.0;
  lp.set_objective(obj);
  for (const Halfspace& h : keep) {
    auto a = h.normal(dim);
    a.push_back(-1.0);
    lp.add_ge(a, h.rhs);
  }
  for (const Halfspace* h : violate) {
    auto a = h->normal(dim);
    a.push_back(1.0);
    lp.add_le(a, h->rhs);
  }
  std::vector<double> cap(dim + 1, 0.0);
  cap[dim] = 1.0;
  lp.add_le(cap, 1.0);
  const LpResult r = lp.solve();
  return r.status == LpStatus::optimal ? r.objective : -kInf;
}

// min over {z : others} of the left side of h, compared with its rhs.
inline bool implied(const Halfspace& h, const std::vector<Halfspace>& others, std::size_t dim,
                    double tol) {
  LinearProgram lp(dim);
  for (std::size_t v = 0; v < dim; ++v) lp.set_free(v);
  auto a = h.normal(dim);
  for (double& c : a) c = -c;
  lp.set_objective(a);
  for (const Halfspace& o : others) lp.add_ge(o.normal(dim), o.rhs);
  const LpResult r = lp.solve();
  if (r.status == LpStatus::infeasible) return true;
  if (r.status == LpStatus::unbounded) return false;
  return -r.objective >= h.rhs - tol;
}

inline void drop_redundant(std::vector<Halfspace>& hs, std::size_t dim, double tol) {
  // Same index pair: only the tightest bound matters.
  std::vector<Halfspace> uniq;
  for (const Halfspace& h : hs) {
    auto it = std::find_if(uniq.begin(), uniq.end(),
                           [&](const Halfspace& u) { return u.i == h.i && u.j == h.j; });
    if (it == uniq.end()) uniq.push_back(h);
    else if (h.rhs > it->rhs) *it = h;
  }
  for (std::size_t r = 0; r < uniq.size();) {
    std::vector<Halfspace> others;
    for (std::size_t s = 0; s < uniq.size(); ++s)
      if (s != r) others.push_back(uniq[s]);
    if (implied(uniq[r], others, dim, tol)) uniq.erase(uniq.begin() + static_cast<long>(r));
    else ++r;
  }
  hs = std::move(uniq);
}

inline std::optional<Polyhedron> try_merge(const Polyhedron& P, const Polyhedron& Q,
                                           std::size_t dim, const RegionOptions& opt) {
  std::vector<Halfspace> env;
  std::vector<const Halfspace*> p_rest, q_rest;
  for (const Halfspace& h : P.halfspaces) {
    if (implied(h, Q.halfspaces, dim, opt.redundancy_tolerance)) env.push_back(h);
    else p_rest.push_back(&h);
  }
  for (const Halfspace& h : Q.halfspaces) {
    if (implied(h, P.halfspaces, dim, opt.redundancy_tolerance)) env.push_back(h);
    else q_rest.push_back(&h);
  }
  // The union is convex iff no point of the envelope violates one
  // non-envelope constraint of each polyhedron.
  for (const Halfspace* a : p_rest)
    for (const Halfspace* b : q_rest)
      if (interior_margin(env, {a, b}, dim) > opt.feasibility_slack) return std::nullopt;
  Polyhedron U;
  U.sequences = P.sequences;
  U.sequences.insert(U.sequences.end(), Q.sequences.begin(), Q.sequences.end());
  U.halfspaces = std::move(env);
  drop_redundant(U.halfspaces, dim, opt.redundancy_tolerance);
  return U;
}

inline bool same_polyhedron(const Polyhedron& a, const Polyhedron& b) {
  if (a.halfspaces.size() != b.halfspaces.size()) return false;
  for (const Halfspace& h : a.halfspaces)
    if (std::none_of(b.halfspaces.begin(), b.halfspaces.end(),
                     [&](const Halfspace& g) { return g.same_constraint(h); }))
      return false;
  return true;
}

}  // namespace detail

/// Halfspaces of H_d((m_p)); nullopt when a constant constraint is violated.
inline std::optional<std::vector<Halfspace>> sequence_halfspaces(
    const LossSpec& loss, const std::vector<std::size_t>& seq, std::size_t d) {
  const std::size_t M = loss.hypotheses();
  std::vector<Halfspace> out;
  auto add = [&](std::size_t i, std::size_t p, std::size_t j, std::size_t q,
                 bool strict) -> bool {
    const double rhs = rate_difference(loss.at(i, p), loss.at(j, q));
    if (rhs == kInf) return false;
    if (rhs == -kInf) return true;
    if (i == j) return strict ? rhs < 0.0 : rhs <= 0.0;
    out.push_back({i, p, j, q, rhs});
    return true;
  };
  for (std::size_t p = 0; p < seq.size(); ++p)
    for (std::size_t i = 0; i < M; ++i)
      if (i != seq[p] && !add(seq[p], p, i, p, false)) return std::nullopt;
  for (std::size_t p = 0; p < seq.size(); ++p)
    if (p != d && !add(seq[p], p, seq[d], d, true)) return std::nullopt;
  return out;
}

/// Decomposes every A(d) into polyhedra by enumerating all M^D sequences,
/// pruning empty cells and redundant constraints, then merging pieces
/// whose union is convex.
inline RegionSet build_regions(const LossSpec& loss, const RegionOptions& opt = {}) {
  const std::size_t M = loss.hypotheses();
  const std::size_t D = loss.decisions();
  if (D < 2) throw ValidationError("expert.d", "regions need at least 2 decisions");
  std::size_t count = 1;
  for (std::size_t p = 0; p < D; ++p) {
    if (count > opt.enumeration_cap / M)
      throw ResourceError("build_regions: M^d exceeds the enumeration cap of " +
                          std::to_string(opt.enumeration_cap));
    count *= M;
  }
  const std::size_t dim = M - 1;

  RegionSet rs;
  rs.hypotheses = M;
  rs.regions.resize(D);
  std::vector<std::size_t> seq(D, 0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t r = idx;
    for (std::size_t p = D; p-- > 0;) {
      seq[p] = r % M;
      r /= M;
    }
    for (std::size_t d = 0; d < D; ++d) {
      auto hs = sequence_halfspaces(loss, seq, d);
      if (!hs) continue;
      if (detail::interior_margin(*hs, {}, dim) <= opt.feasibility_slack) continue;
      detail::drop_redundant(*hs, dim, opt.redundancy_tolerance);
      Polyhedron P{{seq}, std::move(*hs)};
      auto& list = rs.regions[d];
      auto dup = std::find_if(list.begin(), list.end(),
                              [&](const Polyhedron& Q) { return detail::same_polyhedron(P, Q); });
      if (dup != list.end()) dup->sequences.push_back(seq);
      else list.push_back(std::move(P));
    }
  }
  if (!opt.merge) return rs;
  for (auto& list : rs.regions) {
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t a = 0; a < list.size() && !changed; ++a)
        for (std::size_t b = a + 1; b < list.size() && !changed; ++b)
          if (auto U = detail::try_merge(list[a], list[b], dim, opt)) {
            list[a] = std::move(*U);
            list.erase(list.begin() + static_cast<long>(b));
            changed = true;
          }
    }
  }
  return rs;
}

struct RegionInfimum {
  double value = 0.0;      // +inf when no tilt reaches the region
  Vec minimizer;           // z attaining the infimum
  Vec tilt;                // t with grad phi(t) = minimizer
  bool unreachable = false;
  bool converged = true;
  bool shortcut = false;   // z~ strictly inside the region
  int polyhedron = -1;
  int iterations = 0;
};

/// inf of Phi*_m(., x) over the closure of one polyhedron {Gz >= h}.
///
/// Solved through the dual sup_{lambda >= 0} <lambda, h> - phi(G' lambda)
/// by projected Newton; dom phi is all of R^{M-1}, so there is no duality
/// gap, and the primal minimizer is grad phi at t = G' lambda*. A dual that
/// runs past the divergence bound certifies that the polyhedron misses the
/// domain of Phi*.
inline RegionInfimum inf_rate_over_polyhedron(const LlrFamily& fam, std::size_t m,
                                              const Policy& x, const Polyhedron& P,
                                              const TransformConfig& cfg = {}) {
  const std::size_t n = fam.dim();
  const auto ni = static_cast<Eigen::Index>(n);
  const auto k = static_cast<Eigen::Index>(P.halfspaces.size());
  Mat G = Mat::Zero(k, ni);
  Vec h(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const Halfspace& hs = P.halfspaces[static_cast<std::size_t>(r)];
    const auto a = hs.normal(n);
    for (std::size_t c = 0; c < n; ++c) G(r, static_cast<Eigen::Index>(c)) = a[c];
    h[r] = hs.rhs;
  }

  RegionInfimum out;
  auto dual = [&](const Vec& lam, MgfDerivatives* der) {
    const Vec t = G.transpose() * lam;
    if (der) {
      *der = phi_grad_hess(fam, m, x, t);
      return der->value - lam.dot(h);
    }
    return phi(fam, m, x, t) - lam.dot(h);
  };

  Vec lam = Vec::Zero(k);
  MgfDerivatives der;
  double F = dual(lam, &der);
  for (int it = 0;; ++it) {
    out.iterations = it;
    const Vec g = G * der.gradient - h;
    Vec pg = g;
    for (Eigen::Index r = 0; r < k; ++r)
      if (lam[r] <= 0.0) pg[r] = std::min(g[r], 0.0);
    const double res = k ? pg.lpNorm<Eigen::Infinity>() : 0.0;
    if (res <= cfg.region_stationarity) break;
    if (-F > cfg.divergence_bound || lam.norm() > cfg.divergence_bound) {
      out.unreachable = true;
      out.value = kInf;
      return out;
    }
    if (it >= cfg.region_max_iterations) {
      out.converged = false;
      break;
    }

    // Constraints pinned at zero with a positive gradient stay put.
    const double eps_active = std::min(1e-8, res);
    std::vector<Eigen::Index> free_set;
    for (Eigen::Index r = 0; r < k; ++r)
      if (!(lam[r] <= eps_active && g[r] > 0.0)) free_set.push_back(r);
    const Mat H = G * der.hessian * G.transpose();
    Vec dir = -g;
    if (!free_set.empty()) {
      const auto f = static_cast<Eigen::Index>(free_set.size());
      Mat Hf(f, f);
      Vec gf(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        gf[a] = g[free_set[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < f; ++b)
          Hf(a, b) = H(free_set[static_cast<std::size_t>(a)], free_set[static_cast<std::size_t>(b)]);
      }
      const Vec pf = detail::damped_newton_step(Hf, -gf, cfg.condition_limit);
      for (Eigen::Index a = 0; a < f; ++a) dir[free_set[static_cast<std::size_t>(a)]] = pf[a];
    }

    auto search = [&](const Vec& p, Vec& next, double& Fn) {
      for (double step = 1.0; step > 1e-20; step *= 0.5) {
        next = (lam + step * p).cwiseMax(0.0);
        Fn = dual(next, nullptr);
        if (Fn <= F + 1e-4 * g.dot(next - lam) && Fn <= F) return true;
      }
      return false;
    };
    Vec next;
    double Fn = F;
    if (!search(dir, next, Fn) && !search(-g, next, Fn)) break;  // stalled at machine precision
    lam = next;
    F = dual(lam, &der);
  }

  out.tilt = G.transpose() * lam;
  out.minimizer = der.gradient;
  out.value = std::max(0.0, -F);
  return out;
}

/// inf over A(d) of Phi*_m(., x): zero when z~_m(x) lies strictly inside,
/// otherwise the smallest polyhedron infimum.
inline RegionInfimum inf_rate_over_region(const LlrFamily& fam, std::size_t m, const Policy& x,
                                          const LossSpec& loss, std::size_t d,
                                          const RegionSet& regions,
                                          const TransformConfig& cfg = {}) {
  const Vec zt = mean_llr(fam, m, x);
  if (f_decision(loss, lift(zt), d) < -cfg.strict_margin) {
    RegionInfimum out;
    out.minimizer = zt;
    out.tilt = Vec::Zero(zt.size());
    out.shortcut = true;
    return out;
  }
  RegionInfimum best;
  best.value = kInf;
  best.unreachable = true;
  const auto& polys = regions[d];
  for (std::size_t p = 0; p < polys.size(); ++p) {
    RegionInfimum r = inf_rate_over_polyhedron(fam, m, x, polys[p], cfg);
    r.polyhedron = static_cast<int>(p);
    if (r.value < best.value) best = r;
  }
  return best;
}

}  // namespace exponentlab
