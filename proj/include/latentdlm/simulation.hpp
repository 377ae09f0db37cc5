#pragma once

// Synthetic datasets with known lag-responses: exponential Almon curves,
// a two-mode Almon mixture, a linearly decaying curve, half-normal statics,
// and negative binomial or ALD-thresholded binary responses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "latentdlm/distributions.hpp"
#include "latentdlm/error.hpp"
#include "latentdlm/lag_design.hpp"
#include "latentdlm/rng.hpp"

namespace latentdlm {

struct LagWeightCurve {
  std::vector<double> weights;  // lags 0..tau, non-negative, sum to 1
  std::string shape;
};

/// w_k proportional to exp(theta1 k + theta2 k^2), normalized over 0..tau.
inline LagWeightCurve almon_weights(double theta1, double theta2, std::size_t tau) {
  std::vector<double> expo(tau + 1);
  for (std::size_t k = 0; k <= tau; ++k) {
    const double kk = static_cast<double>(k);
    expo[k] = theta1 * kk + theta2 * kk * kk;
  }
  const double top = *std::max_element(expo.begin(), expo.end());
  LagWeightCurve out;
  out.shape = "almon(" + std::to_string(theta1) + "," + std::to_string(theta2) + ")";
  out.weights.resize(tau + 1);
  double total = 0.0;
  for (std::size_t k = 0; k <= tau; ++k) total += out.weights[k] = std::exp(expo[k] - top);
  for (auto& w : out.weights) w /= total;
  return out;
}

/// 0.7 almon(0.2, -0.03) + 0.3 almon(6, -0.1): an early and a late mode.
inline LagWeightCurve o3_weights(std::size_t tau = 40) {
  const auto w1 = almon_weights(0.2, -0.03, tau);
  const auto w2 = almon_weights(6.0, -0.1, tau);
  LagWeightCurve out;
  out.shape = "0.7*almon(0.2,-0.03)+0.3*almon(6,-0.1)";
  out.weights.resize(tau + 1);
  for (std::size_t k = 0; k <= tau; ++k) out.weights[k] = 0.7 * w1.weights[k] + 0.3 * w2.weights[k];
  return out;
}

/// w_k proportional to (tau + 1 - k): strictly decreasing, positive at k = tau.
inline LagWeightCurve pm10_weights(std::size_t tau = 40) {
  if (tau < 1) throw ValidationError("pm10_weights: tau must be at least 1");
  LagWeightCurve out;
  out.shape = "linear-decay";
  out.weights.resize(tau + 1);
  const double total = static_cast<double>((tau + 1) * (tau + 2)) / 2.0;
  for (std::size_t k = 0; k <= tau; ++k) out.weights[k] = static_cast<double>(tau + 1 - k) / total;
  return out;
}

enum class ResponseKind { count, binary };

inline std::string to_string(ResponseKind k) { return k == ResponseKind::count ? "count" : "binary"; }

inline ResponseKind parse_response_kind(const std::string& s) {
  if (s == "count" || s == "nb") return ResponseKind::count;
  if (s == "binary" || s == "bqr") return ResponseKind::binary;
  throw ValidationError("unknown response kind '" + s + "' (expected count or binary)");
}

/// The three dynamic covariates, in order.
inline const std::vector<std::string>& simulated_dynamic_names() {
  static const std::vector<std::string> names{"rhum", "pm10", "o3"};
  return names;
}

struct SimConfig {
  ResponseKind kind = ResponseKind::count;
  std::size_t n = 5114;  // response rows
  std::size_t tau = 40;
  std::vector<double> static_effects{-0.5, 0.01};
  std::vector<double> dynamic_effects{0.5, 0.01, -0.5};  // rhum, pm10, o3
  std::optional<double> intercept;                       // -1 for count, 0 for binary
  double xi = 50.0;
  double q = 0.9;
  std::uint64_t seed = 1;
  double ar_coefficient = 0.8;
  // Optional externally supplied dynamics (rhum, pm10, o3); must cover n + tau points.
  std::optional<std::vector<TimeSeries>> external_dynamics;

  double resolved_intercept() const {
    return intercept.value_or(kind == ResponseKind::count ? -1.0 : 0.0);
  }
};

struct DynamicTruth {
  std::string name;
  double effect = 0.0;
  LagWeightCurve curve;
};

struct TruthRecord {
  ResponseKind kind = ResponseKind::count;
  std::size_t n = 0;
  std::size_t tau = 0;
  double intercept = 0.0;
  std::vector<double> static_effects;
  std::vector<DynamicTruth> dynamics;
  double xi = 0.0;
  double q = 0.0;
  std::uint64_t seed = 0;
  std::string dynamic_source;
  double ar_coefficient = 0.0;
};

/// Time runs oldest to newest. Dynamics hold tau history points ahead of the
/// first response; y, statics, eta and ystar cover the n response times only.
struct SimDataset {
  std::vector<double> y;
  std::vector<TimeSeries> statics;
  std::vector<TimeSeries> dynamics;
  std::vector<double> eta;
  std::vector<double> ystar;  // binary only
  TruthRecord truth;

  std::size_t history() const { return truth.tau; }
};

inline void validate(const SimConfig& c) {
  if (c.n < 1) throw ValidationError("simulate: n must be at least 1");
  if (c.tau < 1) throw ValidationError("simulate: tau must be at least 1");
  if (c.dynamic_effects.size() != simulated_dynamic_names().size())
    throw ValidationError("simulate: expected 3 dynamic effects (rhum, pm10, o3)");
  if (!(c.xi > 0.0)) throw ValidationError("simulate: xi must be positive");
  if (!(c.q > 0.0 && c.q < 1.0)) throw ValidationError("simulate: q must lie in (0, 1)");
  if (!(std::abs(c.ar_coefficient) < 1.0)) throw ValidationError("simulate: AR coefficient must lie in (-1, 1)");
}

inline std::vector<double> simulate_ar1(std::size_t length, double phi, RngStream& rng) {
  std::vector<double> x(length);
  double prev = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (std::size_t t = 0; t < length; ++t) {
    x[t] = t == 0 ? prev : phi * prev + rng.normal();
    prev = x[t];
  }
  return x;
}

inline SimDataset simulate_dataset(const SimConfig& config, RngStream& rng) {
  validate(config);
  const std::size_t n = config.n;
  const std::size_t tau = config.tau;
  const std::size_t total = n + tau;

  SimDataset out;
  TruthRecord& truth = out.truth;
  truth.kind = config.kind;
  truth.n = n;
  truth.tau = tau;
  truth.intercept = config.resolved_intercept();
  truth.static_effects = config.static_effects;
  truth.xi = config.xi;
  truth.q = config.q;
  truth.seed = config.seed;
  truth.ar_coefficient = config.ar_coefficient;
  truth.dynamic_source = config.external_dynamics ? "external" : "synthetic-ar1";

  for (std::size_t s = 0; s < config.static_effects.size(); ++s) {
    TimeSeries col{"static_" + std::to_string(s + 1), std::vector<double>(n)};
    for (auto& v : col.values) v = std::abs(rng.normal());
    out.statics.push_back(std::move(col));
  }

  const auto& names = simulated_dynamic_names();
  const std::vector<LagWeightCurve> curves{almon_weights(0.32, -0.02, tau), pm10_weights(tau), o3_weights(tau)};
  for (std::size_t d = 0; d < names.size(); ++d) {
    TimeSeries series{names[d], {}};
    if (config.external_dynamics) {
      const auto& ext = *config.external_dynamics;
      auto it = std::find_if(ext.begin(), ext.end(), [&](const TimeSeries& s) { return s.name == names[d]; });
      if (it == ext.end()) throw ValidationError("simulate: external dynamics lack column '" + names[d] + "'");
      if (it->values.size() < total)
        throw ValidationError("simulate: external column '" + names[d] + "' has " +
                              std::to_string(it->values.size()) + " rows, need " + std::to_string(total));
      series.values.assign(it->values.begin(), it->values.begin() + static_cast<std::ptrdiff_t>(total));
      for (double v : series.values)
        if (!std::isfinite(v)) throw ValidationError("simulate: external column '" + names[d] + "' has missing values");
    } else {
      series.values = simulate_ar1(total, config.ar_coefficient, rng);
    }
    out.dynamics.push_back(std::move(series));
    truth.dynamics.push_back({names[d], config.dynamic_effects[d], curves[d]});
  }

  out.eta.assign(n, truth.intercept);
  for (std::size_t t = 0; t < n; ++t) {
    double eta = truth.intercept;
    for (std::size_t s = 0; s < out.statics.size(); ++s) eta += config.static_effects[s] * out.statics[s].values[t];
    const std::size_t now = t + tau;  // index into the dynamic series
    for (std::size_t d = 0; d < out.dynamics.size(); ++d) {
      double lagged = 0.0;
      for (std::size_t k = 0; k <= tau; ++k) lagged += curves[d].weights[k] * out.dynamics[d].values[now - k];
      eta += config.dynamic_effects[d] * lagged;
    }
    out.eta[t] = eta;
  }

  out.y.resize(n);
  if (config.kind == ResponseKind::count) {
    // NB(xi, p) with mean xi p / (1 - p): Poisson with Gamma(xi, scale p/(1-p)) rate
    for (std::size_t t = 0; t < n; ++t) {
      std::gamma_distribution<double> g(config.xi, std::exp(out.eta[t]));
      const double rate = g(rng.engine());
      if (!(rate > 0.0)) {
        out.y[t] = 0.0;
        continue;
      }
      std::poisson_distribution<std::int64_t> pois(rate);
      out.y[t] = static_cast<double>(pois(rng.engine()));
    }
  } else {
    out.ystar.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      out.ystar[t] = out.eta[t] + sample_ald({0.0, 1.0, config.q}, rng);
      out.y[t] = out.ystar[t] > 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace latentdlm
