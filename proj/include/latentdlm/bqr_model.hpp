#pragma once

// Binary quantile distributed-lag regression with an asymmetric Laplace link:
//   y_t = I(y*_t > 0),  y*_t = x_t' beta + e_t,  e_t ~ ALD(0, 1, q).
// The ALD is a normal location-scale mixture over nu_t ~ Exp(1):
//   y*_t | nu_t ~ N(x_t' beta + psi nu_t, phi2 nu_t),
// which makes beta conditionally Gaussian given (y*, nu).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/distributions.hpp"
#include "latentdlm/error.hpp"
#include "latentdlm/gaussian_core.hpp"
#include "latentdlm/rng.hpp"
#include "latentdlm/variable_selection.hpp"

namespace latentdlm {

struct BQRData {
  std::vector<std::uint8_t> y;  // 0 or 1
  Eigen::MatrixXd X;
};

struct BQRConstants {
  double q = 0.5;
  double ald_psi2 = 0.0;  // ((1 - 2q) / (q (1 - q)))^2
  double phi2 = 8.0;      // 2 / (q (1 - q))
  double delta2 = 2.0;    // 2 + ald_psi2 / phi2
  double ald_psi = 0.0;   // signed root, sign of (1 - 2q)
};

struct BQRState {
  Eigen::VectorXd beta;
  InclusionVector gamma;
  Eigen::VectorXd ystar;
  Eigen::VectorXd nu;
};

struct BQRPriors {
  GaussianPrior coeff;
};

inline void validate(const BQRData& data) {
  if (static_cast<Eigen::Index>(data.y.size()) != data.X.rows())
    throw ValidationError("BQR data: response length " + std::to_string(data.y.size()) +
                          " does not match design rows " + std::to_string(data.X.rows()));
  for (std::size_t t = 0; t < data.y.size(); ++t)
    if (data.y[t] > 1) throw ValidationError("BQR data: non-binary response at row " + std::to_string(t));
}

inline BQRConstants bqr_constants(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("bqr_constants: q must lie in (0, 1)");
  BQRConstants c;
  c.q = q;
  const double qq = q * (1.0 - q);
  c.ald_psi = (1.0 - 2.0 * q) / qq;
  c.ald_psi2 = c.ald_psi * c.ald_psi;
  c.phi2 = 2.0 / qq;
  c.delta2 = 2.0 + c.ald_psi2 / c.phi2;
  return c;
}

/// y*_t from ALD(x_t' beta, 1, q) truncated to (0, inf) when y_t = 1 and to
/// (-inf, 0] when y_t = 0. Drawn from the marginal given beta, so it does
/// not depend on the current nu.
inline Eigen::VectorXd update_ystar(const BQRState& state, const BQRData& data, const BQRConstants& constants,
                                    RngStream& rng) {
  const Eigen::VectorXd eta = data.X * state.beta;
  Eigen::VectorXd ystar(eta.size());
  for (Eigen::Index t = 0; t < eta.size(); ++t) {
    const auto side = data.y[static_cast<std::size_t>(t)] ? Truncation::positive : Truncation::negative;
    ystar(t) = sample_truncated_ald({eta(t), 1.0, constants.q}, side, rng);
  }
  return ystar;
}

/// nu_t ~ GIG(1/2, chi2_t, delta2) with chi2_t = (y*_t - x_t' beta)^2 / phi2.
inline Eigen::VectorXd update_nu(const BQRState& state, const BQRData& data, const BQRConstants& constants,
                                 RngStream& rng) {
  const Eigen::VectorXd resid = state.ystar - data.X * state.beta;
  Eigen::VectorXd nu(resid.size());
  for (Eigen::Index t = 0; t < resid.size(); ++t) {
    const double chi2 = std::max(resid(t) * resid(t) / constants.phi2, kWeightFloor);
    nu(t) = std::max(sample_gig_half({chi2, constants.delta2}, rng), kWeightFloor);
  }
  return nu;
}

/// Omega_B = diag(1 / (phi2 nu)) and lambda_B = y* - psi nu.
struct BQRWorking {
  Eigen::VectorXd omega;
  Eigen::VectorXd lambda;
};

inline BQRWorking bqr_working(const BQRState& state, const BQRConstants& constants) {
  BQRWorking w;
  const Eigen::VectorXd nu = state.nu.cwiseMax(kWeightFloor);
  w.omega = (constants.phi2 * nu).cwiseInverse();
  w.lambda = state.ystar - constants.ald_psi * nu;
  return w;
}

/// Gibbs draw of beta under the current inclusion flags.
inline Eigen::VectorXd update_beta_bqr(const BQRState& state, const BQRData& data, const BQRConstants& constants,
                                       const BQRPriors& priors, RngStream& rng) {
  const auto w = bqr_working(state, constants);
  const auto cp = weighted_cross_products(data.X, w.omega, w.lambda);
  return draw_beta(fit_active_set(state.gamma, cp, priors.coeff), data.X.cols(), rng);
}

/// One sweep: y*, then nu, then joint (gamma, beta).
inline BQRState bqr_gibbs_sweep(const BQRState& state, const BQRData& data, const BQRConstants& constants,
                                const BQRPriors& priors, const SelectionConfig& selection, RngStream& rng) {
  BQRState next = state;
  next.ystar = update_ystar(next, data, constants, rng);
  next.nu = update_nu(next, data, constants, rng);
  const auto w = bqr_working(next, constants);
  auto step = joint_update(next.gamma, data.X, w.omega, w.lambda, priors.coeff, selection, rng);
  next.gamma = std::move(step.gamma);
  next.beta = std::move(step.beta);
  return next;
}

inline BQRState bqr_initial_state(const BQRData& data, InclusionVector gamma) {
  validate(data);
  validate(gamma);
  BQRState s;
  s.beta = Eigen::VectorXd::Zero(data.X.cols());
  s.gamma = std::move(gamma);
  s.ystar = Eigen::VectorXd::Zero(data.X.rows());
  s.nu = Eigen::VectorXd::Ones(data.X.rows());
  return s;
}

}  // namespace latentdlm
