#pragma once

// Negative binomial distributed-lag regression,
//   y_t ~ NB(xi, p_t),  p_t = logistic(x_t' beta),  E[y_t] = xi p_t / (1 - p_t),
// sampled with Polya-Gamma latents for beta and Chinese-restaurant-table
// latents for the stopping parameter xi.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/distributions.hpp"
#include "latentdlm/error.hpp"
#include "latentdlm/gaussian_core.hpp"
#include "latentdlm/rng.hpp"
#include "latentdlm/variable_selection.hpp"

namespace latentdlm {

inline constexpr double kProbClamp = 1e-12;

struct NBData {
  std::vector<std::int64_t> y;
  Eigen::MatrixXd X;

  std::int64_t ymax() const { return y.empty() ? 0 : *std::max_element(y.begin(), y.end()); }
};

struct NBState {
  Eigen::VectorXd beta;
  InclusionVector gamma;
  Eigen::VectorXd omega;
  double xi = 1.0;
  std::vector<std::int64_t> psi;
};

struct NBPriors {
  GaussianPrior coeff;
  double a0 = 2.0;         // gamma shape for xi
  double b0 = 1.0 / 50.0;  // gamma rate for xi
  // Holding xi at a large fixed value approximates Poisson regression and
  // skips the (psi, xi) update.
  std::optional<double> fixed_xi;
};

inline void validate(const NBData& data) {
  if (static_cast<Eigen::Index>(data.y.size()) != data.X.rows())
    throw ValidationError("NB data: response length " + std::to_string(data.y.size()) +
                          " does not match design rows " + std::to_string(data.X.rows()));
  for (std::size_t t = 0; t < data.y.size(); ++t)
    if (data.y[t] < 0) throw ValidationError("NB data: negative count at row " + std::to_string(t));
}

inline Eigen::VectorXd nb_linpred(const NBState& state, const Eigen::MatrixXd& X) { return X * state.beta; }

inline Eigen::VectorXd nb_prob(const Eigen::VectorXd& eta) {
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index t = 0; t < eta.size(); ++t) {
    const double e = eta(t);
    const double v = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    p(t) = std::clamp(v, kProbClamp, 1.0 - kProbClamp);
  }
  return p;
}

/// Per-observation log pmf of y under NB(xi, p) with p = logistic(eta):
///   lgamma(y + xi) - lgamma(xi) - lgamma(y + 1) + y log p + xi log(1 - p).
inline double nb_log_likelihood(std::int64_t y, double eta, double xi) {
  const double yd = static_cast<double>(y);
  // log p = -log1p(exp(-eta)), log(1 - p) = -log1p(exp(eta)), evaluated stably
  const double log_p = eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
  const double log_1mp = eta >= 0.0 ? -eta - std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
  return std::lgamma(yd + xi) - std::lgamma(xi) - std::lgamma(yd + 1.0) + yd * log_p + xi * log_1mp;
}

/// omega_t ~ PG(y_t + xi, eta_t), floored for use as precision weights.
inline Eigen::VectorXd update_omega_nb(const NBState& state, const NBData& data, RngStream& rng) {
  const Eigen::VectorXd eta = nb_linpred(state, data.X);
  Eigen::VectorXd omega(eta.size());
  for (Eigen::Index t = 0; t < eta.size(); ++t) {
    const double b = static_cast<double>(data.y[static_cast<std::size_t>(t)]) + state.xi;
    omega(t) = std::max(sample_polya_gamma({b, eta(t)}, rng), kWeightFloor);
  }
  return omega;
}

/// Working response lambda_t = (y_t - xi) / (2 omega_t).
inline Eigen::VectorXd nb_working_response(const NBState& state, const NBData& data) {
  Eigen::VectorXd lambda(state.omega.size());
  for (Eigen::Index t = 0; t < lambda.size(); ++t)
    lambda(t) = (static_cast<double>(data.y[static_cast<std::size_t>(t)]) - state.xi) /
                (2.0 * std::max(state.omega(t), kWeightFloor));
  return lambda;
}

/// Gibbs draw of beta under the current inclusion flags.
inline Eigen::VectorXd update_beta_nb(const NBState& state, const NBData& data, const NBPriors& priors,
                                      RngStream& rng) {
  const auto cp = weighted_cross_products(data.X, state.omega, nb_working_response(state, data));
  return draw_beta(fit_active_set(state.gamma, cp, priors.coeff), data.X.cols(), rng);
}

/// The lower-triangular table-count matrix
///   R(i, j) = (i-1)/i R(i-1, j) + xi/i R(i-1, j-1),  R(1, 1) = 1,
/// for 1 <= j <= i <= ymax. Row i, once normalized, is the distribution of
/// the number of occupied tables after i customers (CRT law).
///
/// Rows are stored normalized together with their log scale; the recursion
/// is linear in the previous row so normalizing as we go loses nothing and
/// keeps large counts or large xi from overflowing.
class RMatrix {
 public:
  RMatrix() = default;

  RMatrix(std::int64_t ymax, double xi) : ymax_(ymax), xi_(xi) {
    if (ymax < 1) throw ValidationError("build_R: ymax must be at least 1");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ValidationError("build_R: xi must be positive and finite");
    const auto n = static_cast<std::size_t>(ymax);
    offsets_.resize(n + 1);
    for (std::size_t i = 1; i <= n; ++i) offsets_[i] = offsets_[i - 1] + i;
    prob_.assign(offsets_[n], 0.0);
    cdf_.assign(offsets_[n], 0.0);
    log_scale_.assign(n + 1, 0.0);

    prob_[0] = 1.0;  // R(1, 1)
    cdf_[0] = 1.0;
    for (std::size_t i = 2; i <= n; ++i) {
      const double a = static_cast<double>(i - 1) / static_cast<double>(i);
      const double b = xi / static_cast<double>(i);
      const double* prev = &prob_[offsets_[i - 2]];
      double* row = &prob_[offsets_[i - 1]];
      double total = 0.0;
      for (std::size_t j = 1; j <= i; ++j) {
        const double stay = j <= i - 1 ? a * prev[j - 1] : 0.0;
        const double move = j >= 2 ? b * prev[j - 2] : 0.0;
        row[j - 1] = stay + move;
        total += row[j - 1];
      }
      double running = 0.0;
      double* crow = &cdf_[offsets_[i - 1]];
      for (std::size_t j = 0; j < i; ++j) {
        row[j] /= total;
        running += row[j];
        crow[j] = running;
      }
      log_scale_[i] = log_scale_[i - 1] + std::log(total);
    }
  }

  std::int64_t ymax() const { return ymax_; }
  double xi_at_build() const { return xi_; }

  /// Unnormalized R(i, j), 1-based; zero outside 1 <= j <= i.
  double operator()(std::int64_t i, std::int64_t j) const {
    if (i < 1 || i > ymax_ || j < 1 || j > i) return 0.0;
    return std::exp(log_scale_[static_cast<std::size_t>(i)]) * probability(i, j);
  }

  /// Row i normalized to sum to one.
  double probability(std::int64_t i, std::int64_t j) const {
    if (i < 1 || i > ymax_ || j < 1 || j > i) return 0.0;
    return prob_[offsets_[static_cast<std::size_t>(i - 1)] + static_cast<std::size_t>(j - 1)];
  }

  /// Draw j from normalized row i.
  std::int64_t sample_row(std::int64_t i, RngStream& rng) const {
    const double* crow = &cdf_[offsets_[static_cast<std::size_t>(i - 1)]];
    const double u = rng.uniform() * crow[i - 1];
    const double* hit = std::lower_bound(crow, crow + i, u);
    return std::min<std::int64_t>(static_cast<std::int64_t>(hit - crow) + 1, i);
  }

 private:
  std::int64_t ymax_ = 0;
  double xi_ = 0.0;
  std::vector<std::size_t> offsets_;  // start of row i+1 in the packed arrays
  std::vector<double> prob_;
  std::vector<double> cdf_;
  std::vector<double> log_scale_;
};

inline RMatrix build_R(std::int64_t ymax, double xi) { return RMatrix(ymax, xi); }

struct PsiXiUpdate {
  std::vector<std::int64_t> psi;
  double xi = 1.0;
};

/// psi_t from normalized row y_t of R (psi_t = 0 when y_t = 0), then
///   xi ~ Gamma(a0 + sum psi, b0 - sum log(1 - p_t))   (rate form).
inline PsiXiUpdate update_psi_xi(const NBState& state, const NBData& data, const NBPriors& priors, RngStream& rng) {
  PsiXiUpdate out;
  out.psi.assign(data.y.size(), 0);
  const std::int64_t ymax = data.ymax();
  double psi_sum = 0.0;
  if (ymax >= 1) {
    const RMatrix R = build_R(ymax, state.xi);
    for (std::size_t t = 0; t < data.y.size(); ++t) {
      if (data.y[t] >= 1) out.psi[t] = R.sample_row(data.y[t], rng);
      psi_sum += static_cast<double>(out.psi[t]);
    }
  }
  const Eigen::VectorXd p = nb_prob(nb_linpred(state, data.X));
  double log1m_sum = 0.0;
  for (Eigen::Index t = 0; t < p.size(); ++t) log1m_sum += std::log1p(-p(t));
  const double rate = priors.b0 - log1m_sum;
  if (!std::isfinite(rate)) throw NumericalError("update_psi_xi: non-finite gamma rate");
  out.xi = sample_gamma(priors.a0 + psi_sum, rate, rng);
  out.xi = std::max(out.xi, kWeightFloor);
  return out;
}

/// One sweep: omega, then joint (gamma, beta), then (psi, xi).
inline NBState nb_gibbs_sweep(const NBState& state, const NBData& data, const NBPriors& priors,
                              const SelectionConfig& selection, RngStream& rng) {
  NBState next = state;
  next.omega = update_omega_nb(next, data, rng);
  const Eigen::VectorXd lambda = nb_working_response(next, data);
  auto step = joint_update(next.gamma, data.X, next.omega, lambda, priors.coeff, selection, rng);
  next.gamma = std::move(step.gamma);
  next.beta = std::move(step.beta);
  if (priors.fixed_xi) {
    next.xi = *priors.fixed_xi;
  } else {
    auto px = update_psi_xi(next, data, priors, rng);
    next.psi = std::move(px.psi);
    next.xi = px.xi;
  }
  return next;
}

/// Starting state: beta = 0 with the given flags, xi at the fixed value or
/// the prior mean a0 / b0.
inline NBState nb_initial_state(const NBData& data, const NBPriors& priors, InclusionVector gamma) {
  validate(data);
  validate(gamma);
  NBState s;
  s.beta = Eigen::VectorXd::Zero(data.X.cols());
  s.gamma = std::move(gamma);
  s.omega = Eigen::VectorXd::Ones(data.X.rows());
  s.xi = priors.fixed_xi ? *priors.fixed_xi : priors.a0 / priors.b0;
  s.psi.assign(data.y.size(), 0);
  return s;
}

}  // namespace latentdlm
