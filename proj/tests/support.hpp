#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "exponentlab/scenario.hpp"

namespace testsupport {

using exponentlab::Expert;
using exponentlab::LossSpec;
using exponentlab::Policy;
using exponentlab::Scenario;
using exponentlab::SourceModel;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Policy random_policy(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) s += v = std::exponential_distribution<double>(1.0)(rng);
  for (double& v : w) v /= s;
  w.back() = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) w.back() -= w[i];
  if (w.back() < 0.0) w.back() = 0.0;
  return Policy{w};
}

/// M hypotheses, two gaussian sources with means in [-2, 2], one diagonal-free
/// expert with rates in [0, 0.3] (one of them zero) and agent 0 likewise.
inline Scenario random_gaussian_scenario(std::mt19937_64& rng, std::size_t M = 3) {
  Scenario sc;
  sc.num_hypotheses = M;
  sc.priors.assign(M, 1.0 / static_cast<double>(M));
  for (int g = 0; g < 2; ++g) {
    std::vector<double> mu(M);
    for (double& v : mu) v = uniform(rng, -2.0, 2.0);
    const double sigma = uniform(rng, 0.5, 3.0);
    sc.sources.push_back(SourceModel::gaussian("s" + std::to_string(g), mu, sigma * sigma));
  }
  auto rates = [&] {
    std::vector<double> c(M);
    for (double& v : c) v = uniform(rng, 0.0, 0.3);
    c[std::uniform_int_distribution<std::size_t>(0, M - 1)(rng)] = 0.0;
    return c;
  };
  sc.agent0.sources = {0, 1};
  sc.agent0.loss = LossSpec::diagonal_free(rates());
  Expert e;
  e.id = 1;
  e.sources = {0, 1};
  e.loss = LossSpec::diagonal_free(rates());
  e.q = 1.0;
  e.assumption4 = true;
  sc.experts.push_back(e);
  exponentlab::validate(sc);
  return sc;
}

/// A finite source on `support` letters with strictly positive probabilities.
inline SourceModel random_finite_source(std::mt19937_64& rng, std::size_t M, std::size_t support,
                                        const std::string& id = "f") {
  std::vector<std::vector<double>> p(M, std::vector<double>(support));
  for (auto& row : p) {
    double s = 0.0;
    for (double& v : row) s += v = uniform(rng, 0.05, 1.0);
    for (double& v : row) v /= s;
  }
  return SourceModel::finite(id, p);
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double y, double mu, double var) {
  return std::exp(-0.5 * (y - mu) * (y - mu) / var) / std::sqrt(2.0 * M_PI * var);
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b)}) + abs_floor;
}

}  // namespace testsupport
