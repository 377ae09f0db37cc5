#pragma once

// Gaussian full conditionals for beta given a weighted working response,
// and the log marginal score that drives the inclusion Metropolis step.
//
// With precision weights Omega and working response lambda,
//   V = (X' Omega X + v^-1)^-1,   M = V (X' Omega lambda + v^-1 m).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/error.hpp"

namespace latentdlm {

inline constexpr double kWeightFloor = 1e-12;

struct GaussianPrior {
  Eigen::VectorXd m;
  Eigen::MatrixXd v;

  static GaussianPrior isotropic(Eigen::Index p, double variance, double mean = 0.0) {
    return {Eigen::VectorXd::Constant(p, mean), Eigen::MatrixXd::Identity(p, p) * variance};
  }

  Eigen::Index size() const { return m.size(); }

  /// Marginal prior of the listed coefficients.
  GaussianPrior restrict(std::span<const Eigen::Index> active) const {
    const auto k = static_cast<Eigen::Index>(active.size());
    GaussianPrior out{Eigen::VectorXd(k), Eigen::MatrixXd(k, k)};
    for (Eigen::Index a = 0; a < k; ++a) {
      out.m(a) = m(active[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < k; ++b)
        out.v(a, b) = v(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
    }
    return out;
  }
};

struct PosteriorMoments {
  Eigen::VectorXd M;
  Eigen::MatrixXd V;
  Eigen::MatrixXd chol_V;  // lower triangular, V = L L'
  double logdet_V = 0.0;
  double quad = 0.0;  // M' V^-1 M
};

/// X' Omega X and X' Omega lambda for the full design. Computing these once
/// lets both sides of a Metropolis comparison reuse them.
struct WeightedCrossProducts {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
};

namespace detail {

// Index of the first non-positive pivot met by an unpivoted Cholesky sweep.
inline Eigen::Index failing_pivot(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return j;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return -1;
}

/// Cholesky of a symmetric matrix with diagonal jitter escalation
/// (1e-10, x10, up to 1e-6) when the plain factorization fails.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const Eigen::Index n = a.rows();
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    llt.compute(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(std::string(what) + ": matrix not positive definite (pivot " +
                       std::to_string(failing_pivot(a)) + ")");
}

inline double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

inline WeightedCrossProducts weighted_cross_products(const Eigen::MatrixXd& X, const Eigen::VectorXd& omega,
                                                     const Eigen::VectorXd& lambda) {
  if (omega.size() != X.rows() || lambda.size() != X.rows())
    throw ValidationError("weighted_cross_products: X, omega and lambda must have equal rows");
  const Eigen::VectorXd w = omega.cwiseMax(kWeightFloor);
  WeightedCrossProducts out;
  const Eigen::MatrixXd wx = X.array().colwise() * w.array();
  out.gram.noalias() = X.transpose() * wx;
  out.rhs.noalias() = wx.transpose() * lambda;
  return out;
}

/// Moments from precomputed cross products restricted to the active set.
inline PosteriorMoments posterior_moments(const Eigen::MatrixXd& gram_active, const Eigen::VectorXd& rhs_active,
                                          const GaussianPrior& prior) {
  const Eigen::Index k = prior.size();
  PosteriorMoments out;
  if (k == 0) {
    out.M = prior.m;
    out.V = prior.v;
    out.chol_V.resize(0, 0);
    return out;
  }
  const auto prior_llt = detail::robust_llt(prior.v, "prior covariance");
  const Eigen::MatrixXd prior_prec = prior_llt.solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd prec = gram_active + prior_prec;
  prec = 0.5 * (prec + prec.transpose()).eval();
  const auto prec_llt = detail::robust_llt(prec, "posterior precision");

  out.V = prec_llt.solve(Eigen::MatrixXd::Identity(k, k));
  out.V = 0.5 * (out.V + out.V.transpose()).eval();
  out.M = prec_llt.solve(rhs_active + prior_prec * prior.m);
  out.logdet_V = -detail::logdet_from_llt(prec_llt);
  out.quad = (prec_llt.matrixU() * out.M).squaredNorm();
  out.chol_V = detail::robust_llt(out.V, "posterior covariance").matrixL();
  return out;
}

inline PosteriorMoments posterior_moments(const Eigen::MatrixXd& X_active, const Eigen::VectorXd& omega,
                                          const Eigen::VectorXd& lambda, const GaussianPrior& prior) {
  if (X_active.cols() != prior.size())
    throw ValidationError("posterior_moments: prior dimension does not match active columns");
  const auto cp = weighted_cross_products(X_active, omega, lambda);
  return posterior_moments(cp.gram, cp.rhs, prior);
}

/// Log Gaussian marginal likelihood of the working response, up to terms
/// that do not depend on the active set:
///   -1/2 log|v| + 1/2 log|V| + 1/2 (M' V^-1 M - m' v^-1 m).
inline double log_marginal_score(const PosteriorMoments& moments, const GaussianPrior& prior) {
  if (prior.size() == 0) return 0.0;
  const auto prior_llt = detail::robust_llt(prior.v, "prior covariance");
  const double prior_quad = prior.m.dot(prior_llt.solve(prior.m));
  return -0.5 * detail::logdet_from_llt(prior_llt) + 0.5 * moments.logdet_V +
         0.5 * (moments.quad - prior_quad);
}

}  // namespace latentdlm
