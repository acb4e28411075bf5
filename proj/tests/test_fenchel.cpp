#include <gtest/gtest.h>

#include <random>

#include "exponentlab/fenchel.hpp"
#include "support.hpp"

using namespace exponentlab;

namespace {

Scenario binary_gaussian() {
  Scenario sc;
  sc.num_hypotheses = 2;
  sc.priors = {0.5, 0.5};
  sc.sources.push_back(SourceModel::gaussian("g", {0.0, 1.0}, 1.0));
  sc.agent0.sources = {0};
  sc.agent0.loss = LossSpec::zero_one(2);
  validate(sc);
  return sc;
}

// Phi* for gaussian sources is a quadratic form: phi(t) = <t, mu> + t'St/2.
double gaussian_phi_star(const Scenario& sc, const std::vector<std::size_t>& ids, const Policy& x,
                         std::size_t m, const Vec& z) {
  const auto n = static_cast<Eigen::Index>(sc.num_hypotheses - 1);
  Vec mu = Vec::Zero(n);
  Mat S = Mat::Zero(n, n);
  for (std::size_t g = 0; g < ids.size(); ++g) {
    const SourceModel& s = sc.sources[ids[g]];
    Vec a(n), b(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const double mc = s.means[static_cast<std::size_t>(c + 1)], m0 = s.means[0];
      a[c] = (mc - m0) / s.variance;
      b[c] = (m0 * m0 - mc * mc) / (2 * s.variance);
    }
    mu += x[g] * (a * s.means[m] + b);
    S += x[g] * s.variance * a * a.transpose();
  }
  const Vec r = z - mu;
  return 0.5 * r.dot(S.ldlt().solve(r));
}

// sup_t <t,z> - phi(t) by grid search refined around the best point.
double brute_phi_star(const LlrFamily& fam, std::size_t m, const Policy& x, const Vec& z) {
  Vec center = Vec::Zero(2);
  double width = 8.0, best = -1e300;
  for (int round = 0; round < 12; ++round) {
    Vec best_t = center;
    for (int a = -20; a <= 20; ++a)
      for (int b = -20; b <= 20; ++b) {
        Vec t = center;
        t[0] += width * a / 20.0;
        t[1] += width * b / 20.0;
        const double v = t.dot(z) - phi(fam, m, x, t);
        if (v > best) {
          best = v;
          best_t = t;
        }
      }
    center = best_t;
    width /= 6.0;
  }
  return best;
}

}  // namespace

TEST(Fenchel, BinaryChernoffInformationIsOneEighth) {
  const Scenario sc = binary_gaussian();
  const LlrFamily fam(sc, {0});
  const Policy x{{1.0}};
  EXPECT_NEAR(lambda_star(fam, 1, 0, x, 0.0).value, 0.125, 1e-10);
  EXPECT_NEAR(chernoff_info(fam, 0, 1, x).value, 0.125, 1e-10);
  EXPECT_NEAR(chernoff_info(fam, 0, 1, x).s, 0.5, 1e-6);
}

TEST(Fenchel, LambdaStarGaussianClosedForm) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const Scenario sc = testsupport::random_gaussian_scenario(rng);
    const LlrFamily fam(sc, {0});
    const Policy x{{1.0}};
    const double dmu = sc.sources[0].means[2] - sc.sources[0].means[0];
    if (std::abs(dmu) < 0.05) continue;
    const double kk = dmu * dmu / (2 * sc.sources[0].variance);
    const double z = testsupport::uniform(rng, -0.5, 0.5);
    const ScalarTransformResult r = lambda_star(fam, 0, 2, x, z);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(testsupport::close_rel(r.value, (z + kk) * (z + kk) / (4 * kk), 1e-8, 1e-10));
  }
}

TEST(Fenchel, LambdaStarFiniteBoundedRange) {
  // Lambda' ranges over (min llr, max llr); z beyond that is +inf.
  std::mt19937_64 rng(6);
  Scenario sc;
  sc.num_hypotheses = 2;
  sc.priors = {0.5, 0.5};
  sc.sources.push_back(testsupport::random_finite_source(rng, 2, 3));
  const LlrFamily fam(sc, {0});
  const Policy x{{1.0}};
  double hi = -1e300;
  for (std::size_t y = 0; y < 3; ++y)
    hi = std::max(hi, std::log(sc.sources[0].probabilities[1][y] / sc.sources[0].probabilities[0][y]));
  EXPECT_TRUE(std::isinf(lambda_star(fam, 0, 1, x, hi + 0.1).value));
  EXPECT_TRUE(std::isfinite(lambda_star(fam, 0, 1, x, hi - 0.1).value));
}

TEST(Fenchel, PhiStarGaussianClosedForm) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const Scenario sc = testsupport::random_gaussian_scenario(rng);
    const LlrFamily fam(sc, {0, 1});
    const Policy x = testsupport::random_policy(rng, 2);
    const std::size_t m = static_cast<std::size_t>(k % 3);
    Vec z = mean_llr(fam, m, x);
    z[0] += testsupport::uniform(rng, -0.5, 0.5);
    z[1] += testsupport::uniform(rng, -0.5, 0.5);
    const TransformResult r = phi_star(fam, m, x, z);
    const double want = gaussian_phi_star(sc, {0, 1}, x, m, z);
    if (want > 1e4) continue;  // nearly collinear sources
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(testsupport::close_rel(r.value, want, 1e-7, 1e-10)) << r.value << " vs " << want;
  }
}

TEST(Fenchel, PhiStarFiniteMatchesBruteForce) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    Scenario sc;
    sc.num_hypotheses = 3;
    sc.priors = {1 / 3.0, 1 / 3.0, 1 / 3.0};
    sc.sources.push_back(testsupport::random_finite_source(rng, 3, 4, "a"));
    sc.sources.push_back(testsupport::random_finite_source(rng, 3, 3, "b"));
    const LlrFamily fam(sc, {0, 1});
    const Policy x = testsupport::random_policy(rng, 2);
    const Vec z = 0.8 * mean_llr(fam, 0, x) + 0.2 * mean_llr(fam, 2, x);
    const TransformResult r = phi_star(fam, 1, x, z);
    EXPECT_NEAR(r.value, brute_phi_star(fam, 1, x, z), 1e-6);
  }
}

TEST(Fenchel, RateFunctionNonnegativeAndZeroAtMean) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    Scenario sc = testsupport::random_gaussian_scenario(rng);
    sc.sources.push_back(testsupport::random_finite_source(rng, 3, 3, "letters"));
    const LlrFamily fam(sc, {0, 1, 2});
    const Policy x = testsupport::random_policy(rng, 3);
    const std::size_t m = static_cast<std::size_t>(k % 3);
    const Vec zt = mean_llr(fam, m, x);
    EXPECT_NEAR(phi_star(fam, m, x, zt).value, 0.0, 1e-9);
    for (int r = 0; r < 5; ++r) {
      Vec z = zt;
      z[0] += testsupport::uniform(rng, -1, 1);
      z[1] += testsupport::uniform(rng, -1, 1);
      EXPECT_GE(phi_star(fam, m, x, z).value, -1e-12);
    }
  }
}

TEST(Fenchel, UnreachablePointIsInfinite) {
  // One gaussian source: Z lives on a line, anything off it has no tilt.
  std::mt19937_64 rng(10);
  const Scenario sc = testsupport::random_gaussian_scenario(rng);
  const LlrFamily fam(sc, {0});
  const Policy x{{1.0}};
  Vec z = mean_llr(fam, 0, x);
  const Vec a = fam.models[0].gaussian_slope();
  z += 0.5 * Vec((Vec(2) << -a[1], a[0]).finished()).normalized();
  const TransformResult r = phi_star(fam, 0, x, z);
  EXPECT_TRUE(r.unbounded);
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(Fenchel, MaximizerIsTheTiltWithMeanZ) {
  std::mt19937_64 rng(12);
  const Scenario sc = testsupport::random_gaussian_scenario(rng);
  const LlrFamily fam(sc, {0, 1});
  const Policy x{{0.4, 0.6}};
  Vec z = mean_llr(fam, 2, x);
  z[0] += 0.3;
  const TransformResult r = phi_star(fam, 2, x, z);
  ASSERT_TRUE(r.converged);
  EXPECT_LT((phi_grad_hess(fam, 2, x, r.maximizer).gradient - z).norm(), 1e-8);
}
