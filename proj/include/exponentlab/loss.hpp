#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace exponentlab {

/// Exponential decay rate of a loss, c = -lim (1/n) log C(n).
///
/// An infinite rate encodes a loss that is exactly zero for every n. It is
/// kept as a flag rather than a large sentinel so that expressions such as
/// z - c and max over terms have exact semantics: z - inf = -inf, and a
/// -inf term never wins a max.
class LossRate {
 public:
  constexpr LossRate() = default;
  constexpr LossRate(double value) : value_(value) {}  // NOLINT(implicit)

  static constexpr LossRate infinite() {
    LossRate r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }

  /// Finite value; throws for an infinite rate.
  double value() const {
    if (infinite_) throw std::logic_error("LossRate::value() on infinite rate");
    return value_;
  }

  /// IEEE view, +inf for an infinite rate.
  constexpr double as_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr bool operator==(LossRate a, LossRate b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// z - c with z - inf = -inf.
inline double subtract_rate(double z, LossRate c) {
  return c.is_infinite() ? -std::numeric_limits<double>::infinity()
                         : z - c.value();
}

/// Right-hand side c_a - c_b of a halfspace z[i] - z[j] >= c_a - c_b.
///
/// inf - finite = +inf (empty halfspace), finite - inf = -inf (whole space).
/// inf - inf compares two terms that are both -inf inside a max, so it
/// constrains nothing and maps to -inf.
inline double rate_difference(LossRate a, LossRate b) {
  if (a.is_infinite()) {
    return b.is_infinite() ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
  }
  if (b.is_infinite()) return -std::numeric_limits<double>::infinity();
  return a.value() - b.value();
}

/// Matrix of loss decay rates c(m, d), hypotheses by decisions.
class LossSpec {
 public:
  LossSpec() = default;
  LossSpec(std::size_t hypotheses, std::size_t decisions)
      : rows_(hypotheses), cols_(decisions), rates_(hypotheses * decisions) {}

  /// c(m,m) = inf, c(m,d) = rates[m] otherwise. This is the shape of an
  /// agent-0 loss and of an expert under the equal-decision-space model.
  static LossSpec diagonal_free(const std::vector<double>& rates) {
    const std::size_t n = rates.size();
    LossSpec s(n, n);
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t d = 0; d < n; ++d)
        s.at(m, d) = (m == d) ? LossRate::infinite() : LossRate(rates[m]);
    return s;
  }

  static LossSpec zero_one(std::size_t hypotheses) {
    return diagonal_free(std::vector<double>(hypotheses, 0.0));
  }

  std::size_t hypotheses() const { return rows_; }
  std::size_t decisions() const { return cols_; }

  LossRate& at(std::size_t m, std::size_t d) { return rates_.at(m * cols_ + d); }
  LossRate at(std::size_t m, std::size_t d) const { return rates_.at(m * cols_ + d); }

  /// Per-hypothesis rates when the matrix has the diagonal-free shape.
  std::optional<std::vector<double>> diagonal_free_rates() const {
    if (rows_ != cols_ || rows_ == 0) return std::nullopt;
    std::vector<double> out(rows_);
    for (std::size_t m = 0; m < rows_; ++m) {
      std::optional<double> row;
      for (std::size_t d = 0; d < cols_; ++d) {
        const LossRate r = at(m, d);
        if (d == m) {
          if (!r.is_infinite()) return std::nullopt;
          continue;
        }
        if (r.is_infinite()) return std::nullopt;
        if (row && *row != r.value()) return std::nullopt;
        row = r.value();
      }
      out[m] = row.value_or(0.0);
    }
    return out;
  }

  bool is_diagonal_free() const { return diagonal_free_rates().has_value(); }

  std::optional<double> min_finite() const {
    std::optional<double> lo;
    for (const LossRate& r : rates_)
      if (r.is_finite()) lo = lo ? std::min(*lo, r.value()) : r.value();
    return lo;
  }

  friend bool operator==(const LossSpec& a, const LossSpec& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.rates_ == b.rates_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<LossRate> rates_;
};

/// Shifts all finite rates so that the smallest one is 0.
inline LossSpec canonicalize_loss(const LossSpec& spec) {
  LossSpec out = spec;
  const auto lo = spec.min_finite();
  if (!lo) return out;
  for (std::size_t m = 0; m < spec.hypotheses(); ++m)
    for (std::size_t d = 0; d < spec.decisions(); ++d)
      if (spec.at(m, d).is_finite()) out.at(m, d) = spec.at(m, d).value() - *lo;
  return out;
}

}  // namespace exponentlab
