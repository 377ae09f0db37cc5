#pragma once

// Samplers and closed forms for the latent-variable updates: Polya-Gamma,
// GIG with index 1/2, asymmetric Laplace (with one-sided truncation),
// gamma and multivariate normal.

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "latentdlm/error.hpp"
#include "latentdlm/rng.hpp"

namespace latentdlm {

// ---------------------------------------------------------------------------
// Polya-Gamma

struct PolyaGammaParams {
  double b = 1.0;  // shape, any positive real
  double c = 0.0;  // tilt
};

/// E[PG(b, c)] = b tanh(c/2) / (2c), with limit b/4 at c = 0.
inline double pg_mean(double b, double c) {
  const double a = std::abs(c);
  if (a < 1e-6) return b * (0.25 - a * a / 48.0);
  return b * std::tanh(0.5 * a) / (2.0 * a);
}

/// Var[PG(b, c)] = b (sinh c - c) / (4 c^3 cosh^2(c/2)), with limit b/24.
inline double pg_variance(double b, double c) {
  const double x = 0.5 * std::abs(c);
  if (x < 0.025) {
    const double x2 = x * x;
    return b * (1.0 / 24.0 - x2 / 30.0 + 17.0 * x2 * x2 / 840.0);
  }
  const double th = std::tanh(x);
  const double c3 = 8.0 * x * x * x;
  return b * (2.0 * th - 2.0 * x * (1.0 - th * th)) / (4.0 * c3);
}

namespace detail {

constexpr double kPi = std::numbers::pi;
constexpr double kPgTrunc = 0.64;  // switch point of the Devroye envelope

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double log_norm_cdf(double x) {
  if (x > -20.0) return std::log(norm_cdf(x));
  // asymptotic Mills-ratio expansion for the far left tail
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log(series);
}

// n-th coefficient of the alternating series for the J*(1, z) density
inline double pg_series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kPgTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x <= 0.0) return 0.0;
  const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) -
                       2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(expnt);
}

/// Exact sampler for PG(1, c) by Devroye-style alternating-series rejection.
/// Constants depending on c are computed once so repeated draws are cheap.
class PolyaGammaOne {
 public:
  explicit PolyaGammaOne(double c) : z_(0.5 * std::abs(c)) {
    fz_ = 0.125 * kPi * kPi + 0.5 * z_ * z_;
    const double t = kPgTrunc;
    const double b = std::sqrt(1.0 / t) * (t * z_ - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z_ + 1.0);
    const double x0 = std::log(fz_) + fz_ * t;
    const double xb = x0 - z_ + log_norm_cdf(b);
    const double xa = x0 + z_ + log_norm_cdf(a);
    const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
    p_exp_ = 1.0 / (1.0 + qdivp);
  }

  double operator()(RngStream& rng) const {
    for (;;) {
      const double x = rng.uniform() < p_exp_ ? kPgTrunc + rng.exponential() / fz_
                                               : truncated_inverse_gauss(rng);
      double s = pg_series_coef(0, x);
      const double y = rng.uniform() * s;
      for (int n = 1;; ++n) {
        if (n % 2 == 1) {
          s -= pg_series_coef(n, x);
          if (y <= s) return 0.25 * x;
        } else {
          s += pg_series_coef(n, x);
          if (y > s) break;
        }
      }
    }
  }

 private:
  // inverse Gaussian with mean 1/z and shape 1, truncated to (0, kPgTrunc)
  double truncated_inverse_gauss(RngStream& rng) const {
    const double t = kPgTrunc;
    double x = t + 1.0;
    if (1.0 / t > z_) {
      double alpha = 0.0;
      while (rng.uniform() > alpha) {
        double e1 = rng.exponential();
        double e2 = rng.exponential();
        while (e1 * e1 > 2.0 * e2 / t) {
          e1 = rng.exponential();
          e2 = rng.exponential();
        }
        x = 1.0 + e1 * t;
        x = t / (x * x);
        alpha = std::exp(-0.5 * z_ * z_ * x);
      }
    } else {
      const double mu = 1.0 / z_;
      while (x > t) {
        const double v = rng.normal();
        const double mu_y = mu * v * v;
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
        if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
      }
    }
    return x;
  }

  double z_;
  double fz_;
  double p_exp_;
};

constexpr int kPgSeriesTerms = 200;

// Gamma(shape, 1) for repeated draws at one shape: Marsaglia-Tsang on
// shape + 1 when shape < 1, scaled back by U^(1/shape).
class GammaDraw {
 public:
  explicit GammaDraw(double shape) : boost_(shape < 1.0), inv_shape_(1.0 / shape) {
    d_ = (boost_ ? shape + 1.0 : shape) - 1.0 / 3.0;
    c_ = 1.0 / std::sqrt(9.0 * d_);
  }

  double operator()(RngStream& rng) const {
    double g = 0.0;
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = rng.normal();
        v = 1.0 + c_ * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = rng.uniform();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d_ * (1.0 - v + std::log(v))) {
        g = d_ * v;
        break;
      }
    }
    if (boost_) g *= std::exp(-rng.exponential() * inv_shape_);
    return g;
  }

 private:
  bool boost_;
  double inv_shape_;
  double d_ = 0.0;
  double c_ = 0.0;
};

/// PG(h, c) for 0 < h < 1 from the first kPgSeriesTerms terms of the
/// infinite sum-of-gammas representation, with the remainder replaced by a
/// gamma variable matching its mean and variance.
inline double sample_pg_fractional(double h, double c, RngStream& rng) {
  const double c2 = c * c / (4.0 * kPi * kPi);
  const GammaDraw g(h);
  double sum = 0.0;
  double head_inv = 0.0;
  double head_inv2 = 0.0;
  for (int k = 1; k <= kPgSeriesTerms; ++k) {
    const double km = k - 0.5;
    const double inv = 1.0 / (km * km + c2);
    sum += g(rng) * inv;
    head_inv += inv;
    head_inv2 += inv * inv;
  }
  const double scale = 1.0 / (2.0 * kPi * kPi);
  // Totals over all k: sum 1/d_k = 2 pi^2 E[PG(1,c)], sum 1/d_k^2 = 4 pi^4 Var[PG(1,c)]
  const double tail_inv = std::max(0.0, 2.0 * kPi * kPi * pg_mean(1.0, c) - head_inv);
  const double tail_inv2 = std::max(0.0, 4.0 * std::pow(kPi, 4) * pg_variance(1.0, c) - head_inv2);
  double tail = 0.0;
  if (tail_inv > 0.0 && tail_inv2 > 0.0) {
    const double mean = h * scale * tail_inv;
    const double var = h * scale * scale * tail_inv2;
    std::gamma_distribution<double> tail_dist(mean * mean / var, var / mean);
    tail = tail_dist(rng.engine());
  }
  return scale * sum + tail;
}

}  // namespace detail

/// PG(b, c): exact PG(1, c) draws summed over the integer part of b, plus the
/// truncated-series sampler for the fractional remainder.
inline double sample_polya_gamma(const PolyaGammaParams& params, RngStream& rng) {
  if (!(params.b > 0.0) || !std::isfinite(params.b))
    throw ValidationError("sample_polya_gamma: shape b must be positive, got " + std::to_string(params.b));
  const double whole = std::floor(params.b);
  const double frac = params.b - whole;
  double out = 0.0;
  if (whole > 0.0) {
    const detail::PolyaGammaOne one(params.c);
    const auto n = static_cast<long>(whole);
    for (long i = 0; i < n; ++i) out += one(rng);
  }
  if (frac > 1e-12) out += detail::sample_pg_fractional(frac, params.c, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Generalized inverse Gaussian, index 1/2

/// Density on x > 0 proportional to x^(-1/2) exp(-(chi2 / x + delta2 x) / 2).
struct GigHalfParams {
  double chi2 = 0.0;
  double delta2 = 1.0;
};

/// Inverse Gaussian (Wald) with the given mean and shape. Uses the smaller
/// root in the cancellation-free form so very large means stay accurate.
inline double sample_inverse_gaussian(double mean, double shape, RngStream& rng) {
  const double v = rng.normal();
  const double r = mean * v * v / (2.0 * shape);
  const double x = mean / (1.0 + r + std::sqrt(r * (2.0 + r)));
  if (rng.uniform() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

/// If X ~ GIG(1/2, chi2, delta2) then 1/X ~ GIG(-1/2, delta2, chi2), which is
/// inverse Gaussian with mean sqrt(delta2 / chi2) and shape delta2.
/// chi2 = 0 is the Gamma(1/2, rate delta2/2) limit.
inline double sample_gig_half(const GigHalfParams& params, RngStream& rng) {
  if (!(params.chi2 >= 0.0)) throw ValidationError("sample_gig_half: chi2 must be >= 0");
  if (!(params.delta2 > 0.0)) throw ValidationError("sample_gig_half: delta2 must be > 0");
  if (params.chi2 == 0.0) {
    std::gamma_distribution<double> g(0.5, 2.0 / params.delta2);
    double x = g(rng.engine());
    while (!(x > 0.0)) x = g(rng.engine());
    return x;
  }
  const double y = sample_inverse_gaussian(std::sqrt(params.delta2 / params.chi2), params.delta2, rng);
  return 1.0 / y;
}

// ---------------------------------------------------------------------------
// Asymmetric Laplace (three-parameter, quantile form)

struct AldParams {
  double mu = 0.0;
  double sigma = 1.0;
  double q = 0.5;  // the location mu is the q-th quantile
};

inline void validate(const AldParams& p) {
  if (!(p.q > 0.0 && p.q < 1.0)) throw ValidationError("ALD: q must lie in (0, 1)");
  if (!(p.sigma > 0.0)) throw ValidationError("ALD: sigma must be positive");
}

inline double ald_cdf(double x, const AldParams& p) {
  const double u = (x - p.mu) / p.sigma;
  if (u < 0.0) return p.q * std::exp((1.0 - p.q) * u);
  return 1.0 - (1.0 - p.q) * std::exp(-p.q * u);
}

inline double ald_quantile(double u, const AldParams& p) {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("ald_quantile: u must lie in (0, 1)");
  if (u < p.q) return p.mu + p.sigma / (1.0 - p.q) * std::log(u / p.q);
  return p.mu - p.sigma / p.q * std::log((1.0 - u) / (1.0 - p.q));
}

inline double ald_mean(const AldParams& p) {
  return p.mu + p.sigma * (1.0 - 2.0 * p.q) / (p.q * (1.0 - p.q));
}

inline double sample_ald(const AldParams& p, RngStream& rng) { return ald_quantile(rng.uniform(), p); }

enum class Truncation { positive, negative };

/// ALD restricted to (0, inf) or (-inf, 0] by inversion on the retained
/// tail. The inversion is carried out on the survival scale (positive) or
/// CDF scale (negative) so that tails with tiny mass stay accurate.
inline double sample_truncated_ald(const AldParams& p, Truncation side, RngStream& rng) {
  const double u = rng.uniform();
  const double q = p.q;
  const double s = p.sigma;
  if (side == Truncation::positive) {
    if (p.mu <= 0.0) {
      // (0, inf) lies in the upper exponential piece: memoryless
      return -s / q * std::log(u);
    }
    // survival at 0 and the target survival value
    const double surv0 = 1.0 - q * std::exp(-(1.0 - q) * p.mu / s);
    const double target = u * surv0;
    double x;
    if (target <= 1.0 - q) {
      x = p.mu - s / q * std::log(target / (1.0 - q));
    } else {
      x = p.mu + s / (1.0 - q) * std::log((1.0 - target) / q);
    }
    return std::max(x, std::nextafter(0.0, 1.0));
  }
  if (p.mu >= 0.0) {
    // (-inf, 0] lies in the lower exponential piece
    return s / (1.0 - q) * std::log(u);
  }
  const double cdf0 = 1.0 - (1.0 - q) * std::exp(q * p.mu / s);
  const double target = u * cdf0;
  double x;
  if (target < q) {
    x = p.mu + s / (1.0 - q) * std::log(target / q);
  } else {
    x = p.mu - s / q * std::log((1.0 - target) / (1.0 - q));
  }
  return std::min(x, 0.0);
}

// ---------------------------------------------------------------------------
// Gamma and multivariate normal

inline double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw NumericalError("sample_gamma: shape and rate must be positive and finite (shape=" +
                         std::to_string(shape) + ", rate=" + std::to_string(rate) + ")");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng.engine());
}

/// M + L z with z standard normal; L is a lower-triangular factor of the covariance.
inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& lower_factor,
                                  RngStream& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + lower_factor.triangularView<Eigen::Lower>() * z;
}

}  // namespace latentdlm
