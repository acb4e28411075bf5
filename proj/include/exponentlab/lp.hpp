#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace exponentlab {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

/// Small dense linear program: maximize c'x subject to row constraints,
/// with each variable either nonnegative (default) or free.
///
/// Solved by a two-phase tableau simplex (most negative reduced cost,
/// lowest index on ties). Intended for problems with tens of rows.
class LinearProgram {
 public:
  explicit LinearProgram(std::size_t num_vars)
      : num_vars_(num_vars), free_(num_vars, false), objective_(num_vars, 0.0) {}

  void set_free(std::size_t var) { free_.at(var) = true; }
  void set_objective(std::vector<double> c) {
    check(c);
    objective_ = std::move(c);
  }
  void add_le(std::vector<double> a, double b) {
    check(a);
    rows_.push_back({std::move(a), b});
  }
  void add_ge(std::vector<double> a, double b) {
    for (double& v : a) v = -v;
    add_le(std::move(a), -b);
  }
  void add_eq(std::vector<double> a, double b) {
    add_le(a, b);
    add_ge(std::move(a), b);
  }

  std::size_t num_vars() const { return num_vars_; }
  std::size_t num_rows() const { return rows_.size(); }

  LpResult solve(double eps = 1e-11) const {
    // Split free variables into a difference of two nonnegative ones.
    std::vector<std::size_t> column(num_vars_);
    std::size_t n = 0;
    for (std::size_t v = 0; v < num_vars_; ++v) {
      column[v] = n;
      n += free_[v] ? 2 : 1;
    }
    auto expand = [&](const std::vector<double>& a) {
      std::vector<double> out(n, 0.0);
      for (std::size_t v = 0; v < num_vars_; ++v) {
        out[column[v]] = a[v];
        if (free_[v]) out[column[v] + 1] = -a[v];
      }
      return out;
    };
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (const Row& r : rows_) {
      A.push_back(expand(r.a));
      b.push_back(r.b);
    }
    Tableau tab(A, b, expand(objective_), eps);
    std::vector<double> xs;
    const LpStatus status = tab.solve(xs);

    LpResult out;
    out.status = status;
    if (status == LpStatus::infeasible) return out;
    out.x.assign(num_vars_, 0.0);
    for (std::size_t v = 0; v < num_vars_; ++v)
      out.x[v] = free_[v] ? xs[column[v]] - xs[column[v] + 1] : xs[column[v]];
    out.objective = 0.0;
    for (std::size_t v = 0; v < num_vars_; ++v) out.objective += objective_[v] * out.x[v];
    if (status == LpStatus::unbounded) out.objective = std::numeric_limits<double>::infinity();
    return out;
  }

 private:
  struct Row {
    std::vector<double> a;
    double b;
  };

  void check(const std::vector<double>& a) const {
    if (a.size() != num_vars_) throw std::invalid_argument("LinearProgram: row width mismatch");
  }

  // Tableau for max c'x, Ax <= b, x >= 0. Column n is the phase-one
  // artificial variable, column n+1 the right-hand side; row m is the
  // objective, row m+1 the phase-one objective.
  class Tableau {
   public:
    Tableau(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
            const std::vector<double>& c, double eps)
        : m_(b.size()), n_(c.size()), eps_(eps), nonbasic_(n_ + 1), basic_(m_),
          t_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
      for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) t_[i][j] = A[i][j];
        basic_[i] = static_cast<long>(n_ + i);
        t_[i][n_] = -1.0;
        t_[i][n_ + 1] = b[i];
      }
      for (std::size_t j = 0; j < n_; ++j) {
        nonbasic_[j] = static_cast<long>(j);
        t_[m_][j] = -c[j];
      }
      nonbasic_[n_] = -1;
      t_[m_ + 1][n_] = 1.0;
    }

    LpStatus solve(std::vector<double>& x) {
      std::size_t r = 0;
      for (std::size_t i = 1; i < m_; ++i)
        if (t_[i][n_ + 1] < t_[r][n_ + 1]) r = i;
      if (m_ > 0 && t_[r][n_ + 1] < -eps_) {
        pivot(r, n_);
        if (!run(2) || t_[m_ + 1][n_ + 1] < -eps_) return LpStatus::infeasible;
        for (std::size_t i = 0; i < m_; ++i) {
          if (basic_[i] != -1) continue;
          std::size_t s = 0;
          for (std::size_t j = 1; j <= n_; ++j)
            if (less(t_[i][j], nonbasic_[j], t_[i][s], nonbasic_[s])) s = j;
          pivot(i, s);
        }
      }
      const bool bounded = run(1);
      x.assign(n_, 0.0);
      for (std::size_t i = 0; i < m_; ++i)
        if (basic_[i] >= 0 && static_cast<std::size_t>(basic_[i]) < n_)
          x[static_cast<std::size_t>(basic_[i])] = t_[i][n_ + 1];
      return bounded ? LpStatus::optimal : LpStatus::unbounded;
    }

   private:
    static bool less(double a, long ia, double b, long ib) {
      return a < b || (a == b && ia < ib);
    }

    void pivot(std::size_t r, std::size_t s) {
      const double inv = 1.0 / t_[r][s];
      for (std::size_t i = 0; i < m_ + 2; ++i) {
        if (i == r || std::abs(t_[i][s]) <= eps_) continue;
        const double f = t_[i][s] * inv;
        for (std::size_t j = 0; j < n_ + 2; ++j) t_[i][j] -= t_[r][j] * f;
        t_[i][s] = t_[r][s] * f;
      }
      for (std::size_t j = 0; j < n_ + 2; ++j)
        if (j != s) t_[r][j] *= inv;
      for (std::size_t i = 0; i < m_ + 2; ++i)
        if (i != r) t_[i][s] *= -inv;
      t_[r][s] = inv;
      std::swap(basic_[r], nonbasic_[s]);
    }

    bool run(int phase) {
      const std::size_t obj = m_ + static_cast<std::size_t>(phase) - 1;
      for (std::size_t pivots = 0;; ++pivots) {
        if (pivots > 100000) throw std::runtime_error("LinearProgram: pivot limit exceeded");
        long s = -1;
        for (std::size_t j = 0; j <= n_; ++j) {
          if (nonbasic_[j] == -phase) continue;
          if (s == -1 || less(t_[obj][j], nonbasic_[j], t_[obj][static_cast<std::size_t>(s)],
                              nonbasic_[static_cast<std::size_t>(s)]))
            s = static_cast<long>(j);
        }
        const auto sc = static_cast<std::size_t>(s);
        if (t_[obj][sc] >= -eps_) return true;
        long r = -1;
        for (std::size_t i = 0; i < m_; ++i) {
          if (t_[i][sc] <= eps_) continue;
          if (r == -1) {
            r = static_cast<long>(i);
            continue;
          }
          const auto rc = static_cast<std::size_t>(r);
          const double lhs = t_[i][n_ + 1] / t_[i][sc];
          const double rhs = t_[rc][n_ + 1] / t_[rc][sc];
          if (less(lhs, basic_[i], rhs, basic_[rc])) r = static_cast<long>(i);
        }
        if (r == -1) return false;
        pivot(static_cast<std::size_t>(r), sc);
      }
    }

    std::size_t m_, n_;
    double eps_;
    std::vector<long> nonbasic_, basic_;
    std::vector<std::vector<double>> t_;
  };

  std::size_t num_vars_;
  std::vector<bool> free_;
  std::vector<double> objective_;
  std::vector<Row> rows_;
};

}  // namespace exponentlab
