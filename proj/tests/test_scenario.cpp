#include <gtest/gtest.h>

#include <random>

#include "exponentlab/benchmark.hpp"
#include "exponentlab/scenario_io.hpp"
#include "support.hpp"

using namespace exponentlab;

TEST(Scenario, BundledFileMatchesBuilder) {
  const Scenario file = load_scenario(std::string(EXPONENTLAB_DATA_DIR) + "/benchmark.json");
  EXPECT_EQ(file, benchmark_scenario());
  const Scenario zo = load_scenario(std::string(EXPONENTLAB_DATA_DIR) + "/benchmark_agent01.json");
  EXPECT_EQ(zo, benchmark_scenario(0.9, {0.0, 0.0, 0.0}));
}

TEST(Scenario, JsonRoundTripRandom) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    Scenario sc = testsupport::random_gaussian_scenario(rng, 3 + k % 2);
    sc.sources.push_back(testsupport::random_finite_source(rng, sc.num_hypotheses, 4, "letters"));
    sc.experts.front().sources = {0, 2};
    validate(sc);
    const Scenario back = parse_scenario(scenario_to_json(sc).dump());
    EXPECT_EQ(back, sc);
    EXPECT_EQ(scenario_digest(back), scenario_digest(sc));
  }
}

TEST(Scenario, InfinityIsSpelledAsString) {
  const json doc = scenario_to_json(benchmark_scenario());
  EXPECT_EQ(doc["agent0"]["loss"][0][0], "inf");
  EXPECT_EQ(doc["schema"], 1);
}

TEST(Scenario, DigestChangesWithContent) {
  EXPECT_NE(scenario_digest(benchmark_scenario(0.9)), scenario_digest(benchmark_scenario(0.7)));
  EXPECT_EQ(scenario_digest(benchmark_scenario()).size(), 16u);
}

namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(Scenario, ValidationNamesTheField) {
  const Scenario base = benchmark_scenario();
  {
    Scenario sc = base;
    sc.priors = {0.5, 0.3, 0.3};
    EXPECT_EQ(field_of([&] { validate(sc); }), "hypotheses.priors");
  }
  {
    Scenario sc = base;
    sc.sources[0].variance = 0.0;
    EXPECT_EQ(field_of([&] { validate(sc); }), "sources[optimist]");
  }
  {
    Scenario sc = base;
    sc.agent0.sources = {0, 0};
    EXPECT_EQ(field_of([&] { validate(sc); }), "agent0.sources");
  }
  {
    Scenario sc = base;
    sc.experts[1].q = 0.0;
    EXPECT_EQ(field_of([&] { validate(sc); }), "experts[2].q");
  }
  {
    Scenario sc = base;
    sc.experts[0].loss.at(0, 1) = LossRate::infinite();
    sc.experts[0].loss.at(2, 1) = LossRate::infinite();
    EXPECT_EQ(field_of([&] { validate(sc); }), "experts[1].loss");
  }
  {
    Scenario sc = base;
    sc.experts[0].loss.at(1, 0) = LossRate(-0.1);
    EXPECT_EQ(field_of([&] { validate(sc); }), "experts[1].loss");
  }
  {
    Scenario sc = base;
    sc.experts[2].id = 1;
    EXPECT_EQ(field_of([&] { validate(sc); }), "experts[1].id");
  }
}

TEST(Scenario, ParseErrors) {
  EXPECT_THROW(parse_scenario("{not json"), ParseError);
  EXPECT_THROW(parse_scenario("[]"), ParseError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ParseError);
  json doc = scenario_to_json(benchmark_scenario());
  doc["schema"] = 2;
  EXPECT_THROW(scenario_from_json(doc), ParseError);
  doc = scenario_to_json(benchmark_scenario());
  doc["sources"][0]["kind"] = "poisson";
  EXPECT_THROW(scenario_from_json(doc), ParseError);
  doc = scenario_to_json(benchmark_scenario());
  doc["experts"][0]["d"] = 2;
  EXPECT_THROW(scenario_from_json(doc), ValidationError);
}

TEST(Scenario, PolicyValidation) {
  EXPECT_NO_THROW(validate_policy(Policy{{0.25, 0.75}}, 2));
  EXPECT_THROW(validate_policy(Policy{{0.5, 0.6}}, 2), ValidationError);
  EXPECT_THROW(validate_policy(Policy{{-0.1, 1.1}}, 2), ValidationError);
  EXPECT_THROW(validate_policy(Policy{{1.0}}, 2), ValidationError);
}

TEST(Loss, CanonicalizationShiftsByMinimumFiniteRate) {
  LossSpec s = LossSpec::diagonal_free({0.3, 0.5, 0.4});
  const LossSpec c = canonicalize_loss(s);
  EXPECT_DOUBLE_EQ(c.min_finite().value(), 0.0);
  EXPECT_NEAR(c.at(1, 0).value(), 0.2, 1e-15);
  EXPECT_TRUE(c.at(1, 1).is_infinite());
  const auto rates = c.diagonal_free_rates();
  ASSERT_TRUE(rates.has_value());
  EXPECT_NEAR((*rates)[2], 0.1, 1e-15);
}
