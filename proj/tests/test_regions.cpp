#include <gtest/gtest.h>

#include <random>
#include <set>

#include "exponentlab/benchmark.hpp"
#include "exponentlab/regions.hpp"
#include "support.hpp"

using namespace exponentlab;

namespace {

LossSpec random_loss(std::mt19937_64& rng, std::size_t M, std::size_t D, double p_inf) {
  for (;;) {
    LossSpec s(M, D);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t d = 0; d < D; ++d)
        s.at(m, d) = testsupport::uniform(rng, 0, 1) < p_inf ? LossRate::infinite()
                                                             : LossRate(testsupport::uniform(rng, 0, 0.4));
    bool ok = true;
    for (std::size_t d = 0; d < D; ++d) {
      bool finite = false;
      for (std::size_t m = 0; m < M; ++m) finite = finite || s.at(m, d).is_finite();
      ok = ok && finite;
    }
    if (ok) return s;
  }
}

// Every sampled z: f(z, d) < 0 iff z lies strictly inside a polyhedron of A(d).
void check_membership(const LossSpec& loss, std::mt19937_64& rng, int samples) {
  const RegionSet rs = build_regions(loss);
  const auto M = static_cast<Eigen::Index>(loss.hypotheses());
  for (int k = 0; k < samples; ++k) {
    Vec z(M - 1);
    for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = testsupport::uniform(rng, -1.0, 1.0);
    const Vec z0 = lift(z);
    std::optional<std::size_t> want;
    for (std::size_t d = 0; d < loss.decisions(); ++d)
      if (f_decision(loss, z0, d) < -1e-9) want = d;
    const auto got = rs.locate(z, 1e-12);
    if (want) {
      EXPECT_EQ(got, want) << "z=" << z.transpose();
    } else if (got) {
      EXPECT_GE(f_decision(loss, z0, *got), -1e-9);  // boundary point within rounding
      EXPECT_LT(f_decision(loss, z0, *got), 1e-9);
    }
  }
}

// inf over a polyhedron of the quadratic (z - mu)' P (z - mu) / 2 in two
// dimensions: interior optimum, an edge projection, or a vertex.
double quadratic_inf_2d(const Polyhedron& poly, const Vec& mu, const Mat& P) {
  const double tol = 1e-9;
  double best = kInf;
  auto value = [&](const Vec& z) { return 0.5 * (z - mu).dot(P * (z - mu)); };
  auto consider = [&](const Vec& z) {
    if (poly.contains(z, tol)) best = std::min(best, value(z));
  };
  consider(mu);
  const Mat Pinv = P.inverse();
  const auto& hs = poly.halfspaces;
  for (const Halfspace& h : hs) {
    const auto a = h.normal(2);
    const Vec n = (Vec(2) << a[0], a[1]).finished();
    // argmin on the line n'z = rhs
    const double lam = (h.rhs - n.dot(mu)) / n.dot(Pinv * n);
    consider(mu + lam * Pinv * n);
  }
  for (std::size_t p = 0; p < hs.size(); ++p)
    for (std::size_t q = p + 1; q < hs.size(); ++q) {
      const auto a = hs[p].normal(2), b = hs[q].normal(2);
      Mat A(2, 2);
      A << a[0], a[1], b[0], b[1];
      if (std::abs(A.determinant()) < 1e-12) continue;
      consider(A.inverse() * (Vec(2) << hs[p].rhs, hs[q].rhs).finished());
    }
  return best;
}

}  // namespace

TEST(Regions, MembershipMatchesDefinitionTableI) {
  std::mt19937_64 rng(1);
  for (const Expert& e : benchmark_scenario().experts) check_membership(e.loss, rng, 4000);
}

TEST(Regions, MembershipMatchesDefinitionRandomLosses) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 40; ++k) {
    const std::size_t M = 3 + k % 2, D = 2 + k % 3;
    check_membership(random_loss(rng, M, std::min(D, M), k % 2 ? 0.25 : 0.0), rng, 1500);
  }
}

TEST(Regions, ZeroOneBoundariesAreTheThreeLines) {
  const RegionSet rs = build_regions(LossSpec::zero_one(3));
  std::set<std::pair<std::size_t, std::size_t>> lines;
  for (std::size_t d = 0; d < 3; ++d) {
    ASSERT_EQ(rs[d].size(), 1u);
    EXPECT_EQ(rs[d][0].halfspaces.size(), 2u);
    for (const Halfspace& h : rs[d][0].halfspaces) {
      EXPECT_EQ(h.rhs, 0.0);
      lines.insert({std::min(h.i, h.j), std::max(h.i, h.j)});
    }
  }
  // z1 = 0, z2 = 0, z1 = z2
  EXPECT_EQ(lines, (std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Regions, UnmergedCellsCoverTheSameSet) {
  std::mt19937_64 rng(3);
  const LossSpec loss = random_loss(rng, 3, 3, 0.0);
  RegionOptions raw;
  raw.merge = false;
  const RegionSet a = build_regions(loss), b = build_regions(loss, raw);
  for (int k = 0; k < 3000; ++k) {
    const Vec z = (Vec(2) << testsupport::uniform(rng, -1, 1), testsupport::uniform(rng, -1, 1)).finished();
    EXPECT_EQ(a.locate(z, 1e-12), b.locate(z, 1e-12));
  }
}

TEST(Regions, Errors) {
  EXPECT_THROW(build_regions(LossSpec(3, 1)), ValidationError);
  RegionOptions tight;
  tight.enumeration_cap = 10;
  EXPECT_THROW(build_regions(LossSpec::zero_one(3), tight), ResourceError);
  EXPECT_THROW(f_decision(LossSpec(3, 1), lift(Vec::Zero(2)), 0), std::invalid_argument);
}

TEST(Regions, SmoothedDecisionFunctionConverges) {
  std::mt19937_64 rng(4);
  const LossSpec loss = random_loss(rng, 3, 3, 0.2);
  const std::vector<double> priors{0.2, 0.3, 0.5};
  const double bound_const = std::log(3.0) + std::log(5.0);
  for (double n : {10.0, 100.0, 1000.0}) {
    const LogLossMatrix logc = LogLossMatrix::exponential(loss, n);
    for (int k = 0; k < 200; ++k) {
      const Vec z0 = lift((Vec(2) << testsupport::uniform(rng, -1, 1), testsupport::uniform(rng, -1, 1)).finished());
      for (std::size_t d = 0; d < 3; ++d)
        EXPECT_LE(std::abs(g_decision(logc, priors, z0, d, n) - f_decision(loss, z0, d)), bound_const / n + 1e-9);
    }
  }
}

TEST(Regions, InfimumMatchesExactQuadraticProgram) {
  std::mt19937_64 rng(5);
  int compared = 0, unreachable = 0;
  for (int k = 0; k < 40; ++k) {
    const Scenario sc = testsupport::random_gaussian_scenario(rng);
    const Expert& e = sc.experts.front();
    const LlrFamily fam(sc, e.sources);
    const Policy x = testsupport::random_policy(rng, 2);
    const RegionSet rs = build_regions(e.loss);
    // gaussian phi is quadratic: Phi*(z) = (z - mean)' S^-1 (z - mean) / 2
    Mat S = Mat::Zero(2, 2);
    for (std::size_t g = 0; g < 2; ++g) {
      const LlrModel& mdl = fam.models[g];
      S += x[g] * mdl.variance() * mdl.gaussian_slope() * mdl.gaussian_slope().transpose();
    }
    if (S.determinant() < 1e-6) continue;
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t d = 0; d < 3; ++d) {
        const RegionInfimum r = inf_rate_over_region(fam, m, x, e.loss, d, rs);
        double want = kInf;
        for (const Polyhedron& P : rs[d]) want = std::min(want, quadratic_inf_2d(P, mean_llr(fam, m, x), S.inverse()));
        if (std::isinf(want)) {
          EXPECT_TRUE(r.unreachable);
          ++unreachable;
          continue;
        }
        EXPECT_TRUE(r.converged);
        EXPECT_TRUE(testsupport::close_rel(r.value, want, 1e-7, 1e-9)) << r.value << " vs " << want;
        ++compared;
      }
  }
  EXPECT_GT(compared, 200);
}

TEST(Regions, SingleSourceCellCanBeUnreachable) {
  // Hypotheses 1 and 2 look identical to this source, so z1 = z2 always and
  // the halfspace z1 - z2 >= 0.1 has no tilt reaching it.
  Scenario sc;
  sc.num_hypotheses = 3;
  sc.priors = {1 / 3.0, 1 / 3.0, 1 / 3.0};
  sc.sources.push_back(SourceModel::gaussian("twin", {0.0, 1.0, 1.0}, 1.0));
  const LlrFamily fam(sc, {0});
  const Policy x{{1.0}};
  Polyhedron P;
  P.halfspaces.push_back({1, 0, 2, 0, 0.1});
  for (std::size_t m = 0; m < 3; ++m) {
    const RegionInfimum r = inf_rate_over_polyhedron(fam, m, x, P);
    EXPECT_TRUE(r.unreachable);
    EXPECT_TRUE(std::isinf(r.value));
  }
  P.halfspaces.front().rhs = 0.0;  // the line itself is reachable
  EXPECT_FALSE(inf_rate_over_polyhedron(fam, 0, x, P).unreachable);
}

TEST(Regions, ShortcutWhenMeanIsInside) {
  const Scenario sc = benchmark_scenario();
  const LlrFamily fam(sc, {0, 1});
  const Policy x{{0.5, 0.5}};
  const RegionSet rs = build_regions(LossSpec::zero_one(3));
  for (std::size_t m = 0; m < 3; ++m) {
    const RegionInfimum r = inf_rate_over_region(fam, m, x, LossSpec::zero_one(3), m, rs);
    EXPECT_TRUE(r.shortcut);
    EXPECT_EQ(r.value, 0.0);
  }
}
