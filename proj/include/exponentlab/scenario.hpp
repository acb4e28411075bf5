#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "exponentlab/loss.hpp"

namespace exponentlab {

/// Malformed input (bad JSON, missing keys, wrong types).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A computation that would exceed a configured enumeration cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SourceKind { gaussian, finite };

/// Conditional distributions of one information source under each hypothesis.
struct SourceModel {
  std::string id;
  SourceKind kind = SourceKind::gaussian;
  // gaussian: per-hypothesis mean, one shared variance
  std::vector<double> means;
  double variance = 1.0;
  // finite: probabilities[m][y] over a common support
  std::vector<std::vector<double>> probabilities;

  std::size_t hypotheses() const {
    return kind == SourceKind::gaussian ? means.size() : probabilities.size();
  }
  std::size_t support_size() const {
    return probabilities.empty() ? 0 : probabilities.front().size();
  }

  static SourceModel gaussian(std::string id, std::vector<double> means,
                              double variance) {
    SourceModel s;
    s.id = std::move(id);
    s.kind = SourceKind::gaussian;
    s.means = std::move(means);
    s.variance = variance;
    return s;
  }
  static SourceModel finite(std::string id,
                            std::vector<std::vector<double>> probabilities) {
    SourceModel s;
    s.id = std::move(id);
    s.kind = SourceKind::finite;
    s.probabilities = std::move(probabilities);
    return s;
  }

  friend bool operator==(const SourceModel&, const SourceModel&) = default;
};

/// Weights over an agent's source list (same order as the agent's sources).
struct Policy {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }

  static Policy vertex(std::size_t n, std::size_t i) {
    Policy p{std::vector<double>(n, 0.0)};
    p.weights.at(i) = 1.0;
    return p;
  }
  static Policy barycenter(std::size_t n) {
    return Policy{std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  friend bool operator==(const Policy&, const Policy&) = default;
};

inline constexpr double kSimplexTolerance = 1e-12;

inline void validate_policy(const Policy& x, std::size_t num_sources,
                            const std::string& field = "policy") {
  if (x.size() != num_sources)
    throw ValidationError(field, "expected " + std::to_string(num_sources) +
                                     " weights, got " + std::to_string(x.size()));
  double sum = 0.0;
  for (double w : x.weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError(field, "weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw ValidationError(field, "weights must sum to 1");
}

struct Agent0 {
  std::vector<std::size_t> sources;  // indices into Scenario::sources
  LossSpec loss;                     // M x M, diagonal-free shape

  /// c_0(m) for every hypothesis.
  std::vector<double> rates() const { return loss.diagonal_free_rates().value(); }

  friend bool operator==(const Agent0&, const Agent0&) = default;
};

struct Expert {
  int id = 0;
  std::vector<std::size_t> sources;
  LossSpec loss;  // M x d_k
  double q = 1.0;
  bool assumption4 = false;  // asserts the equal-decision-space loss shape

  std::size_t decisions() const { return loss.decisions(); }

  friend bool operator==(const Expert&, const Expert&) = default;
};

struct Scenario {
  std::size_t num_hypotheses = 0;
  std::vector<double> priors;
  std::vector<SourceModel> sources;
  Agent0 agent0;
  std::vector<Expert> experts;

  const Expert& expert(int id) const {
    for (const Expert& e : experts)
      if (e.id == id) return e;
    throw ValidationError("experts", "no expert with id " + std::to_string(id));
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline void validate_source(const SourceModel& s, std::size_t M,
                            const std::string& field) {
  if (s.hypotheses() != M)
    throw ValidationError(field, "must define a distribution for each of the " +
                                     std::to_string(M) + " hypotheses");
  if (s.kind == SourceKind::gaussian) {
    if (!(s.variance > 0.0) || !std::isfinite(s.variance))
      throw ValidationError(field, "gaussian variance must be > 0");
    for (double mu : s.means)
      if (!std::isfinite(mu)) throw ValidationError(field, "means must be finite");
    return;
  }
  const std::size_t S = s.support_size();
  if (S == 0) throw ValidationError(field, "finite support must be nonempty");
  for (const auto& row : s.probabilities) {
    if (row.size() != S)
      throw ValidationError(field, "all rows must share the same support size");
    double sum = 0.0;
    for (double p : row) {
      if (!(p > 0.0) || !std::isfinite(p))
        throw ValidationError(field,
                              "probabilities must be strictly positive on the support");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ValidationError(field, "probability rows must sum to 1");
  }
}

inline void validate_source_set(const std::vector<std::size_t>& set,
                                std::size_t num_sources, const std::string& field) {
  if (set.empty()) throw ValidationError(field, "source set must be nonempty");
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i] >= num_sources)
      throw ValidationError(field, "unknown source index");
    for (std::size_t j = 0; j < i; ++j)
      if (set[j] == set[i]) throw ValidationError(field, "duplicate source");
  }
}

inline void validate_loss_entries(const LossSpec& loss, const std::string& field) {
  for (std::size_t m = 0; m < loss.hypotheses(); ++m)
    for (std::size_t d = 0; d < loss.decisions(); ++d) {
      const LossRate r = loss.at(m, d);
      if (r.is_finite() && (!std::isfinite(r.value()) || r.value() < 0.0))
        throw ValidationError(field, "loss decay rates must be >= 0");
    }
  for (std::size_t d = 0; d < loss.decisions(); ++d) {
    bool any_finite = false;
    for (std::size_t m = 0; m < loss.hypotheses(); ++m)
      any_finite = any_finite || loss.at(m, d).is_finite();
    if (!any_finite)
      throw ValidationError(field, "decision " + std::to_string(d) +
                                       " has zero loss under every hypothesis");
  }
}

}  // namespace detail

/// Checks every model invariant; throws ValidationError naming the field.
inline void validate(const Scenario& sc) {
  const std::size_t M = sc.num_hypotheses;
  if (M < 2) throw ValidationError("hypotheses.M", "need at least 2 hypotheses");
  if (sc.priors.size() != M)
    throw ValidationError("hypotheses.priors", "expected one prior per hypothesis");
  double sum = 0.0;
  for (double p : sc.priors) {
    if (!(p > 0.0 && p < 1.0))
      throw ValidationError("hypotheses.priors", "priors must lie in (0,1)");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("hypotheses.priors", "priors must sum to 1");

  if (sc.sources.empty()) throw ValidationError("sources", "no sources defined");
  for (std::size_t i = 0; i < sc.sources.size(); ++i) {
    detail::validate_source(sc.sources[i], M, "sources[" + sc.sources[i].id + "]");
    for (std::size_t j = 0; j < i; ++j)
      if (sc.sources[j].id == sc.sources[i].id)
        throw ValidationError("sources", "duplicate source id " + sc.sources[i].id);
  }

  detail::validate_source_set(sc.agent0.sources, sc.sources.size(), "agent0.sources");
  const LossSpec& l0 = sc.agent0.loss;
  if (l0.hypotheses() != M || l0.decisions() != M)
    throw ValidationError("agent0.loss", "must be an M x M matrix");
  detail::validate_loss_entries(l0, "agent0.loss");
  if (!l0.is_diagonal_free())
    throw ValidationError("agent0.loss",
                          "must have c(m,m) = inf and c(m,d) = c(m) for d != m");

  for (std::size_t e = 0; e < sc.experts.size(); ++e) {
    const Expert& ex = sc.experts[e];
    const std::string f = "experts[" + std::to_string(ex.id) + "]";
    if (ex.id < 1) throw ValidationError(f + ".id", "expert ids must be positive");
    for (std::size_t j = 0; j < e; ++j)
      if (sc.experts[j].id == ex.id)
        throw ValidationError(f + ".id", "duplicate expert id");
    detail::validate_source_set(ex.sources, sc.sources.size(), f + ".sources");
    if (ex.loss.hypotheses() != M)
      throw ValidationError(f + ".loss", "must have M rows");
    if (ex.decisions() < 1 || ex.decisions() > M)
      throw ValidationError(f + ".d", "decision-space size must lie in [1, M]");
    detail::validate_loss_entries(ex.loss, f + ".loss");
    if (!(ex.q > 0.0) || !std::isfinite(ex.q))
      throw ValidationError(f + ".q", "q_k must be > 0");
    if (ex.assumption4 && !(ex.decisions() == M && ex.loss.is_diagonal_free()))
      throw ValidationError(f + ".loss",
                            "assumption4 requires d = M, c(m,m) = inf, c(m,d) = c(m)");
  }
}

}  // namespace exponentlab
