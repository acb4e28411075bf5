#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "exponentlab/golden.hpp"
#include "exponentlab/mgf.hpp"

namespace exponentlab {

/// Tolerances shared by every convex-conjugate solve.
struct TransformConfig {
  double residual_tolerance = 1e-9;
  int max_iterations = 200;
  double divergence_bound = 1e6;   // value or |t| beyond this certifies +inf
  double condition_limit = 1e12;   // Hessians worse than this get damped
  double golden_tolerance = 1e-10;
  // infimum of Phi* over a polyhedron, solved through its dual
  double region_stationarity = 1e-11;
  int region_max_iterations = 500;
  double strict_margin = 1e-12;  // f < -margin counts as strict membership
};

struct TransformResult {
  double value = 0.0;  // +inf when unbounded
  Vec maximizer;       // t_z
  bool converged = false;
  bool unbounded = false;
  int iterations = 0;
  double gradient_residual = 0.0;
};

struct ScalarTransformResult {
  double value = 0.0;
  double maximizer = 0.0;  // s_z
  bool converged = false;
  bool unbounded = false;
  int iterations = 0;
  double gradient_residual = 0.0;
};

namespace detail {

/// Solves (H + mu I) p = r with mu = 0 unless H is numerically singular.
inline Vec damped_newton_step(const Mat& hessian, const Vec& rhs, double condition_limit) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(hessian);
  const Vec& w = eig.eigenvalues();
  const double hi = std::max(w.maxCoeff(), 0.0);
  const double lo = w.minCoeff();
  double mu = 0.0;
  if (hi == 0.0 || lo <= hi / condition_limit) mu = std::max(hi, 1.0) / condition_limit;
  const Vec d = (w.array().max(0.0) + mu).matrix();
  return eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(d);
}

}  // namespace detail

/// Phi*_m(z, x) = sup_t { <t, z> - phi_m(t, x) } by damped Newton on t.
///
/// Returns value = +inf with unbounded = true when z lies outside the closure
/// of the gradient range of phi (no exponential tilt has mean z).
inline TransformResult phi_star(const LlrFamily& fam, std::size_t m, const Policy& x,
                                const Vec& z, const TransformConfig& cfg = {},
                                const Vec* warm_start = nullptr) {
  const auto n = static_cast<Eigen::Index>(fam.dim());
  TransformResult out;
  Vec t = warm_start ? *warm_start : Vec::Zero(n);
  auto objective = [&](const Vec& tt) { return tt.dot(z) - phi(fam, m, x, tt); };

  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const MgfDerivatives d = phi_grad_hess(fam, m, x, t);
    const Vec r = z - d.gradient;
    const double value = t.dot(z) - d.value;
    out.iterations = it;
    out.gradient_residual = r.norm();
    if (out.gradient_residual <= cfg.residual_tolerance) {
      out.value = value;
      out.maximizer = t;
      out.converged = true;
      return out;
    }
    if (value > cfg.divergence_bound || t.norm() > cfg.divergence_bound) break;
    if (it == cfg.max_iterations) break;

    Vec p = detail::damped_newton_step(d.hessian, r, cfg.condition_limit);
    double slope = r.dot(p);
    if (!(slope > 0.0)) {
      p = r;
      slope = r.squaredNorm();
    }
    double step = 1.0;
    Vec next = t + p;
    while (objective(next) < value + 1e-4 * step * slope && step > 1e-14) {
      step *= 0.5;
      next = t + step * p;
    }
    if (step <= 1e-14) {
      // Newton direction stalled; gradient ascent instead.
      p = r;
      step = 1.0;
      next = t + p;
      while (objective(next) < value && step > 1e-20) {
        step *= 0.5;
        next = t + step * p;
      }
    }
    t = next;
  }
  out.maximizer = t;
  const double v = objective(t);
  if (v > cfg.divergence_bound || t.norm() > cfg.divergence_bound) {
    out.unbounded = true;
    out.value = std::numeric_limits<double>::infinity();
  } else {
    out.value = v;
  }
  return out;
}

/// Lambda*_ij(z, x) = sup_s { s z - Lambda_ij(s, x) }, s over the real line.
inline ScalarTransformResult lambda_star(const LlrFamily& fam, std::size_t i, std::size_t j,
                                         const Policy& x, double z,
                                         const TransformConfig& cfg = {}) {
  ScalarTransformResult out;
  auto slope_gap = [&](double s) {
    double d1, d2;
    lambda_ij_derivatives(fam, i, j, x, s, d1, d2);
    return d1 - z;
  };
  auto finish = [&](double s, int iterations) {
    out.maximizer = s;
    out.iterations = iterations;
    out.gradient_residual = std::abs(slope_gap(s));
    out.value = s * z - lambda_ij(fam, i, j, x, s);
    out.converged = out.gradient_residual <= cfg.residual_tolerance;
    return out;
  };

  // Lambda' is nondecreasing: bracket the root of Lambda'(s) = z.
  double lo = 0.0, hi = 0.0;
  const double g0 = slope_gap(0.0);
  if (std::abs(g0) <= cfg.residual_tolerance) return finish(0.0, 0);
  int it = 0;
  if (g0 < 0.0) {
    hi = 1.0;
    while (slope_gap(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > cfg.divergence_bound || hi * z - lambda_ij(fam, i, j, x, hi) > cfg.divergence_bound) {
        out.unbounded = true;
        out.maximizer = hi;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
    }
  } else {
    lo = -1.0;
    while (slope_gap(lo) > 0.0) {
      hi = lo;
      lo *= 2.0;
      if (-lo > cfg.divergence_bound || lo * z - lambda_ij(fam, i, j, x, lo) > cfg.divergence_bound) {
        out.unbounded = true;
        out.maximizer = lo;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
    }
  }

  // Safeguarded Newton inside [lo, hi].
  double s = 0.5 * (lo + hi);
  for (it = 1; it <= cfg.max_iterations; ++it) {
    double d1, d2;
    lambda_ij_derivatives(fam, i, j, x, s, d1, d2);
    const double g = d1 - z;
    if (std::abs(g) <= cfg.residual_tolerance) break;
    if (g < 0.0) lo = s; else hi = s;
    double next = (d2 > 0.0) ? s - g / d2 : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(s))) break;
    s = next;
  }
  return finish(s, it);
}

struct ChernoffResult {
  double value = 0.0;  // -min_{s in [0,1]} Lambda_ij(s, x)
  double s = 0.5;
};

inline ChernoffResult chernoff_info(const LlrFamily& fam, std::size_t i, std::size_t j,
                                    const Policy& x, const TransformConfig& cfg = {}) {
  const ScalarOptimum opt = golden_section_minimize(
      [&](double s) { return lambda_ij(fam, i, j, x, s); }, 0.0, 1.0, cfg.golden_tolerance);
  return {std::max(0.0, -opt.value), opt.argument};
}

}  // namespace exponentlab
