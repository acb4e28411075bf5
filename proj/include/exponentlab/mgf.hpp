#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "exponentlab/scenario.hpp"

namespace exponentlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Log-likelihood-ratio vector Z = (log l_{m0})_{m=1}^{M-1} of one source,
/// with exact log moment generating functions under every hypothesis.
///
/// Gaussian sources are affine in the observation, Z = a*y + b. Finite
/// sources keep a table of Z per support point.
class LlrModel {
 public:
  explicit LlrModel(const SourceModel& src)
      : kind_(src.kind), num_hypotheses_(src.hypotheses()) {
    const std::size_t M = num_hypotheses_;
    if (kind_ == SourceKind::gaussian) {
      means_ = src.means;
      variance_ = src.variance;
      a_.resize(static_cast<Eigen::Index>(M - 1));
      b_.resize(static_cast<Eigen::Index>(M - 1));
      const double mu0 = means_[0];
      for (std::size_t m = 1; m < M; ++m) {
        a_[idx(m - 1)] = (means_[m] - mu0) / variance_;
        b_[idx(m - 1)] = (mu0 * mu0 - means_[m] * means_[m]) / (2.0 * variance_);
      }
      return;
    }
    const std::size_t S = src.support_size();
    log_p_.resize(idx(M), idx(S));
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t y = 0; y < S; ++y) log_p_(idx(m), idx(y)) = std::log(src.probabilities[m][y]);
    z_table_.resize(idx(S), idx(M - 1));
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t m = 1; m < M; ++m)
        z_table_(idx(y), idx(m - 1)) = log_p_(idx(m), idx(y)) - log_p_(0, idx(y));
  }

  SourceKind kind() const { return kind_; }
  std::size_t hypotheses() const { return num_hypotheses_; }
  std::size_t dim() const { return num_hypotheses_ - 1; }
  const Vec& gaussian_slope() const { return a_; }
  const Vec& gaussian_offset() const { return b_; }
  double variance() const { return variance_; }
  const std::vector<double>& means() const { return means_; }
  const Mat& log_probabilities() const { return log_p_; }
  const Mat& llr_table() const { return z_table_; }

  /// xi_m(t) = log E_m exp<t, Z>.
  double xi(std::size_t m, const Vec& t) const {
    if (kind_ == SourceKind::gaussian) {
      const double ta = t.dot(a_);
      return t.dot(b_) + ta * means_[m] + 0.5 * variance_ * ta * ta;
    }
    const Vec e = log_p_.row(idx(m)).transpose() + z_table_ * t;
    return log_sum_exp(e);
  }

  /// Adds w * (value, gradient, Hessian) of xi_m at t.
  void accumulate(std::size_t m, const Vec& t, double w, double& value, Vec& grad,
                  Mat& hess) const {
    if (kind_ == SourceKind::gaussian) {
      const double ta = t.dot(a_);
      value += w * (t.dot(b_) + ta * means_[m] + 0.5 * variance_ * ta * ta);
      grad += w * (b_ + a_ * (means_[m] + variance_ * ta));
      hess += (w * variance_) * (a_ * a_.transpose());
      return;
    }
    const Vec e = log_p_.row(idx(m)).transpose() + z_table_ * t;
    const double lse = log_sum_exp(e);
    const Vec p = (e.array() - lse).exp().matrix();
    const Vec mean = z_table_.transpose() * p;
    value += w * lse;
    grad += w * mean;
    hess += w * (z_table_.transpose() * p.asDiagonal() * z_table_ - mean * mean.transpose());
  }

  /// E_m[Z].
  Vec mean(std::size_t m) const {
    if (kind_ == SourceKind::gaussian) return b_ + a_ * means_[m];
    const Vec p = log_p_.row(idx(m)).transpose().array().exp().matrix();
    return z_table_.transpose() * p;
  }

  /// Lambda_ij(s) = log E_i[(l_ji)^s] for this source alone.
  double lambda(std::size_t i, std::size_t j, double s) const {
    if (kind_ == SourceKind::gaussian) {
      const double dm = means_[j] - means_[i];
      return s * (s - 1.0) * dm * dm / (2.0 * variance_);
    }
    const Vec e = (1.0 - s) * log_p_.row(idx(i)).transpose() + s * log_p_.row(idx(j)).transpose();
    return log_sum_exp(e);
  }

  /// First and second derivatives of lambda in s.
  void lambda_derivatives(std::size_t i, std::size_t j, double s, double& d1,
                          double& d2) const {
    if (kind_ == SourceKind::gaussian) {
      const double dm = means_[j] - means_[i];
      const double k = dm * dm / (2.0 * variance_);
      d1 = (2.0 * s - 1.0) * k;
      d2 = 2.0 * k;
      return;
    }
    const Vec li = log_p_.row(idx(i)).transpose();
    const Vec lj = log_p_.row(idx(j)).transpose();
    const Vec e = (1.0 - s) * li + s * lj;
    const Vec p = (e.array() - log_sum_exp(e)).exp().matrix();
    const Vec r = lj - li;
    d1 = p.dot(r);
    d2 = p.dot(r.cwiseProduct(r)) - d1 * d1;
  }

  static double log_sum_exp(const Vec& e) {
    const double hi = e.maxCoeff();
    if (!std::isfinite(hi)) return hi;
    return hi + std::log((e.array() - hi).exp().sum());
  }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  SourceKind kind_;
  std::size_t num_hypotheses_;
  Vec a_, b_;
  std::vector<double> means_;
  double variance_ = 1.0;
  Mat log_p_;
  Mat z_table_;
};

/// The sources available to one agent, in the agent's policy order.
struct LlrFamily {
  std::vector<LlrModel> models;

  LlrFamily() = default;
  LlrFamily(const Scenario& sc, const std::vector<std::size_t>& source_ids) {
    models.reserve(source_ids.size());
    for (std::size_t k : source_ids) models.emplace_back(sc.sources.at(k));
  }

  std::size_t size() const { return models.size(); }
  std::size_t hypotheses() const { return models.front().hypotheses(); }
  std::size_t dim() const { return models.front().dim(); }
};

struct MgfDerivatives {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// xi_m(gamma, t) for the source at position `source` of the family.
inline double xi(const LlrFamily& fam, std::size_t m, std::size_t source, const Vec& t) {
  return fam.models.at(source).xi(m, t);
}

/// phi_m(t, x) = sum_gamma x[gamma] xi_m(gamma, t).
inline double phi(const LlrFamily& fam, std::size_t m, const Policy& x, const Vec& t) {
  double v = 0.0;
  for (std::size_t g = 0; g < fam.size(); ++g)
    if (x[g] != 0.0) v += x[g] * fam.models[g].xi(m, t);
  return v;
}

inline MgfDerivatives phi_grad_hess(const LlrFamily& fam, std::size_t m, const Policy& x,
                                    const Vec& t) {
  const auto n = static_cast<Eigen::Index>(fam.dim());
  MgfDerivatives out{0.0, Vec::Zero(n), Mat::Zero(n, n)};
  for (std::size_t g = 0; g < fam.size(); ++g)
    if (x[g] != 0.0) fam.models[g].accumulate(m, t, x[g], out.value, out.gradient, out.hessian);
  return out;
}

/// z~_m(x) = sum_gamma x[gamma] E_m[Z^gamma], the zero of Phi*_m(., x).
inline Vec mean_llr(const LlrFamily& fam, std::size_t m, const Policy& x) {
  Vec z = Vec::Zero(static_cast<Eigen::Index>(fam.dim()));
  for (std::size_t g = 0; g < fam.size(); ++g)
    if (x[g] != 0.0) z += x[g] * fam.models[g].mean(m);
  return z;
}

/// Lambda_ij(s, x) = sum_gamma x[gamma] log E_i[(l_ji^gamma)^s].
inline double lambda_ij(const LlrFamily& fam, std::size_t i, std::size_t j, const Policy& x,
                        double s) {
  double v = 0.0;
  for (std::size_t g = 0; g < fam.size(); ++g)
    if (x[g] != 0.0) v += x[g] * fam.models[g].lambda(i, j, s);
  return v;
}

/// Per-source terms log E_i[(l_ji^gamma)^s]; these are the LP coefficients
/// of the agent-0 policy step.
inline std::vector<double> lambda_ij_terms(const LlrFamily& fam, std::size_t i, std::size_t j,
                                           double s) {
  std::vector<double> out(fam.size());
  for (std::size_t g = 0; g < fam.size(); ++g) out[g] = fam.models[g].lambda(i, j, s);
  return out;
}

inline void lambda_ij_derivatives(const LlrFamily& fam, std::size_t i, std::size_t j,
                                  const Policy& x, double s, double& d1, double& d2) {
  d1 = d2 = 0.0;
  for (std::size_t g = 0; g < fam.size(); ++g) {
    if (x[g] == 0.0) continue;
    double a = 0.0, b = 0.0;
    fam.models[g].lambda_derivatives(i, j, s, a, b);
    d1 += x[g] * a;
    d2 += x[g] * b;
  }
}

}  // namespace exponentlab
