#pragma once

#include <cmath>
#include <utility>

namespace exponentlab {

struct ScalarOptimum {
  double argument = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
/// The endpoints are compared against the final interior point so that
/// boundary minima are returned exactly.
template <class F>
ScalarOptimum golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-10) {
  constexpr double kInvPhi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2
  ScalarOptimum best{lo, f(lo), 1};
  const double f_hi = f(hi);
  ++best.evaluations;
  if (f_hi < best.value) best = {hi, f_hi, best.evaluations};

  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  best.evaluations += 2;
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
    ++best.evaluations;
  }
  const double mid = 0.5 * (a + b);
  const double f_mid = f(mid);
  ++best.evaluations;
  if (f_mid < best.value) {
    best.argument = mid;
    best.value = f_mid;
  }
  return best;
}

template <class F>
ScalarOptimum golden_section_maximize(F&& f, double lo, double hi, double tol = 1e-10) {
  ScalarOptimum r = golden_section_minimize([&](double s) { return -f(s); }, lo, hi, tol);
  r.value = -r.value;
  return r;
}

}  // namespace exponentlab
