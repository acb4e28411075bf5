#pragma once

#include <vector>

#include "exponentlab/scenario.hpp"

namespace exponentlab {

/// Three hypotheses, two gaussian sources (sigma = 2) that agree under
/// hypotheses 0 and 2 and disagree about hypothesis 1 by +-delta, and three
/// experts with per-hypothesis rates (0,0,0), (0,0,0.2), (0,0.05,0).
/// Priors are uniform.
inline Scenario benchmark_scenario(double delta = 0.9,
                                   const std::vector<double>& agent_rates = {0.0, 0.05, 0.0}) {
  Scenario sc;
  sc.num_hypotheses = 3;
  sc.priors = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  sc.sources.push_back(SourceModel::gaussian("optimist", {-1.0, delta, 1.0}, 4.0));
  sc.sources.push_back(SourceModel::gaussian("pessimist", {-1.0, -delta, 1.0}, 4.0));
  sc.agent0.sources = {0, 1};
  sc.agent0.loss = LossSpec::diagonal_free(agent_rates);
  const std::vector<std::vector<double>> rates = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.2}, {0.0, 0.05, 0.0}};
  for (int k = 0; k < 3; ++k) {
    Expert e;
    e.id = k + 1;
    e.sources = {0, 1};
    e.loss = LossSpec::diagonal_free(rates[static_cast<std::size_t>(k)]);
    e.q = 1.0;
    e.assumption4 = true;
    sc.experts.push_back(std::move(e));
  }
  validate(sc);
  return sc;
}

}  // namespace exponentlab
