#include <gtest/gtest.h>

#include <random>

#include "exponentlab/benchmark.hpp"
#include "exponentlab/simulate.hpp"
#include "support.hpp"

using namespace exponentlab;

namespace {

Scenario binary(const SourceModel& src) {
  Scenario sc;
  sc.num_hypotheses = 2;
  sc.priors = {0.5, 0.5};
  sc.sources.push_back(src);
  sc.agent0.sources = {0};
  sc.agent0.loss = LossSpec::zero_one(2);
  Expert e;
  e.id = 1;
  e.sources = {0};
  e.loss = LossSpec::zero_one(2);
  sc.experts.push_back(e);
  validate(sc);
  return sc;
}

double upper_normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

TEST(Simulate, SlopeOfAnExactLine) {
  std::vector<SlopePoint> pts;
  for (int n = 10; n <= 100; n += 10) pts.push_back({n, 2.0 - 0.125 * n, 1e-4, false});
  const SlopeEstimate s = fit_slope(pts);
  ASSERT_TRUE(s.valid);
  EXPECT_NEAR(s.exponent(), 0.125, 1e-12);
  EXPECT_EQ(s.used.size(), 5u);
  EXPECT_GT(s.standard_error, 0.0);
}

TEST(Simulate, SlopeNeedsThreeUncensoredPoints) {
  std::vector<SlopePoint> pts;
  for (int n = 1; n <= 6; ++n) pts.push_back({n, -1.0 * n, 0.0, n >= 5});
  EXPECT_FALSE(fit_slope(pts).valid);
}

TEST(Simulate, GeneratorIsReproducibleAndStandard) {
  Xoshiro256 a(stream_key({1, 2, 3})), b(stream_key({1, 2, 3})), c(stream_key({1, 2, 4}));
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
  Xoshiro256 g(99);
  const int N = 400000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    const double z = g.normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / N, 0.0, 5.0 / std::sqrt(N));
  EXPECT_NEAR(s2 / N, 1.0, 5.0 * std::sqrt(2.0 / N));
}

TEST(Simulate, BinaryGaussianErrorMatchesExactProbability) {
  // Declare 1 iff the sample mean exceeds 1/2: P_0(D = 1) = Q(sqrt(n) / 2).
  const Scenario sc = binary(SourceModel::gaussian("g", {0.0, 1.0}, 1.0));
  const ExpertModel em(sc, 1);
  SimConfig cfg{{1, 4, 16}, 200000, 5, 0};
  const ExpertSimResult r = simulate_expert(sc, em, Policy{{1.0}}, cfg);
  for (std::size_t ni = 0; ni < 3; ++ni) {
    const double p = upper_normal_tail(std::sqrt(cfg.sample_sizes[ni]) / 2.0);
    const double se = std::sqrt(p * (1 - p) / cfg.trials);
    EXPECT_NEAR(static_cast<double>(r.count(ni, 0, 1)) / cfg.trials, p, 4.5 * se);
    EXPECT_NEAR(static_cast<double>(r.count(ni, 1, 0)) / cfg.trials, p, 4.5 * se);
  }
}

TEST(Simulate, FiniteSourceSingleObservation) {
  std::mt19937_64 rng(41);
  const Scenario sc = binary(testsupport::random_finite_source(rng, 2, 4));
  const auto& p = sc.sources[0].probabilities;
  double want = 0.0;  // P_0(declare 1) with one observation
  for (std::size_t y = 0; y < 4; ++y)
    if (p[1][y] < p[0][y] ? false : p[1][y] > p[0][y]) want += p[0][y];
  const ExpertModel em(sc, 1);
  SimConfig cfg{{1}, 200000, 6, 0};
  const ExpertSimResult r = simulate_expert(sc, em, Policy{{1.0}}, cfg);
  const double se = std::sqrt(want * (1 - want) / cfg.trials) + 1e-12;
  EXPECT_NEAR(static_cast<double>(r.count(0, 0, 1)) / cfg.trials, want, 4.5 * se);
}

TEST(Simulate, FrequenciesSumToOneAndIgnoreWorkerCount) {
  const Scenario sc = benchmark_scenario();
  const ExpertModel em(sc, 3);
  SimConfig one{{5, 10, 15}, 3000, 77, 1}, three{{5, 10, 15}, 3000, 77, 3};
  const ExpertSimResult a = simulate_expert(sc, em, Policy{{0.5, 0.5}}, one);
  const ExpertSimResult b = simulate_expert(sc, em, Policy{{0.5, 0.5}}, three);
  EXPECT_EQ(a.counts, b.counts);
  for (const auto& table : a.counts)
    for (std::size_t m = 0; m < 3; ++m) {
      std::uint64_t row = 0;
      for (std::size_t d = 0; d < 3; ++d) row += table[m * 3 + d];
      EXPECT_EQ(row, one.trials);
    }
  SimConfig other = one;
  other.seed = 78;
  EXPECT_NE(simulate_expert(sc, em, Policy{{0.5, 0.5}}, other).counts, a.counts);
}

TEST(Simulate, AgentSimulationIsDeterministic) {
  const Scenario sc = benchmark_scenario();
  const ExpertModel em(sc, 2);
  const Policy xk{{1.0, 0.0}}, x0{{0.2, 0.8}};
  const ExpertSummary sum = ExpertSummary::from(em, probability_exponents(em, xk));
  SimConfig c1{{6, 12}, 4000, 3, 1}, c2{{6, 12}, 4000, 3, 2};
  const AgentSimResult a = simulate_agent0(sc, x0, &em, &xk, &sum, c1);
  const AgentSimResult b = simulate_agent0(sc, x0, &em, &xk, &sum, c2);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.fallbacks, b.fallbacks);
  EXPECT_EQ(a.fallbacks[0], 0u);  // continuous scores never tie
  const AgentSimResult alone = simulate_agent0(sc, x0, nullptr, nullptr, nullptr, c1);
  for (const auto& table : alone.counts) {
    std::uint64_t total = 0;
    for (auto v : table) total += v;
    EXPECT_EQ(total, 3 * c1.trials);
  }
  EXPECT_THROW(simulate_agent0(sc, x0, &em, nullptr, nullptr, c1), std::invalid_argument);
}

TEST(Simulate, ObservationAllocation) {
  long left = -1;
  EXPECT_EQ(detail::allocate(Policy{{0.3, 0.7}}, 10, left), (std::vector<long>{3, 7}));
  EXPECT_EQ(left, 0);
  EXPECT_EQ(detail::allocate(Policy{{1.0 / 3, 2.0 / 3}}, 10, left), (std::vector<long>{3, 6}));
  EXPECT_EQ(left, 1);
}

TEST(Simulate, ConfigValidation) {
  EXPECT_THROW((SimConfig{{}, 10, 1, 0}).validate(), ValidationError);
  EXPECT_THROW((SimConfig{{5, 5}, 10, 1, 0}).validate(), ValidationError);
  EXPECT_THROW((SimConfig{{5}, 0, 1, 0}).validate(), ValidationError);
}

TEST(Simulate, SmoothedRuleConvergesUniformly) {
  for (const Expert& e : benchmark_scenario().experts) {
    const ConvergenceCheck c = verify_uniform_convergence(e.loss, {0.2, 0.3, 0.5}, {100, 1000, 10000}, 2000, 4);
    EXPECT_TRUE(c.passes);
    EXPECT_TRUE(c.monotone);
  }
}
