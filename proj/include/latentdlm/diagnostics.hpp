#pragma once

// Post-processing of stored draws: autocorrelation, inefficiency factor,
// posterior summaries with HPD intervals, inclusion frequencies, correlation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/error.hpp"

namespace latentdlm {

inline constexpr std::size_t kMinIfLength = 100;

struct Chain {
  Eigen::MatrixXd draws;  // iterations x parameters
  std::vector<std::string> labels;
  int thin = 1;

  Eigen::Index iterations() const { return draws.rows(); }
  Eigen::Index parameters() const { return draws.cols(); }

  Eigen::Index index_of(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return static_cast<Eigen::Index>(j);
    return -1;
  }
};

/// Biased autocovariance estimator normalized by the lag-0 value. A constant
/// series has rho_0 = 1 and zero beyond.
inline std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n <= max_lag) throw ValidationError("autocorrelation: series length must exceed max_lag");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  double c0 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    centered[t] = x[t] - mean;
    c0 += centered[t] * centered[t];
  }
  std::vector<double> rho(max_lag + 1, 0.0);
  rho[0] = 1.0;
  if (!(c0 > 0.0)) return rho;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) ck += centered[t] * centered[t + k];
    rho[k] = ck / c0;
  }
  return rho;
}

/// IF = 1 + 2 sum rho_k, truncated by the initial positive sequence: pairs
/// rho_{2m} + rho_{2m+1} are accumulated while they stay positive.
/// A constant chain has no autocorrelation to sum and gives NaN.
inline double inefficiency_factor(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < kMinIfLength)
    throw ValidationError("inefficiency_factor: need at least " + std::to_string(kMinIfLength) + " draws, got " +
                          std::to_string(n));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  double c0 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    c[t] = x[t] - mean;
    c0 += c[t] * c[t];
  }
  if (!(c0 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  auto rho = [&](std::size_t k) {
    double ck = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) ck += c[t] * c[t + k];
    return ck / c0;
  };
  // Gamma_m = rho_{2m} + rho_{2m+1}; IF = -1 + 2 sum_m Gamma_m
  double sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  return std::max(0.0, -1.0 + 2.0 * sum);
}

/// Linear-interpolation sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile of empty sample");
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Shortest interval containing ceil(mass * n) of the sorted draws.
inline Interval hpd_interval(const std::vector<double>& sorted, double mass = 0.95) {
  if (sorted.empty()) throw ValidationError("hpd_interval: empty sample");
  const std::size_t n = sorted.size();
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  Interval best{sorted.front(), sorted.back()};
  double width = best.upper - best.lower;
  for (std::size_t i = 0; i + count <= n; ++i) {
    const double w = sorted[i + count - 1] - sorted[i];
    if (w < width) {
      width = w;
      best = {sorted[i], sorted[i + count - 1]};
    }
  }
  return best;
}

struct SummaryRow {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  Interval hpd95;
  double inefficiency = std::numeric_limits<double>::quiet_NaN();  // NaN when too short
};

inline SummaryRow summarize(const std::string& label, const std::vector<double>& x) {
  if (x.empty()) throw ValidationError("posterior_summary: no draws for '" + label + "'");
  SummaryRow row;
  row.label = label;
  const auto n = static_cast<double>(x.size());
  for (double v : x) row.mean += v;
  row.mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - row.mean) * (v - row.mean);
  row.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  row.q025 = sorted_quantile(sorted, 0.025);
  row.median = sorted_quantile(sorted, 0.5);
  row.q975 = sorted_quantile(sorted, 0.975);
  row.hpd95 = hpd_interval(sorted, 0.95);
  if (x.size() >= kMinIfLength) row.inefficiency = inefficiency_factor(x);
  return row;
}

inline std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
  return out;
}

inline std::vector<SummaryRow> posterior_summary(const Chain& chain) {
  if (chain.iterations() == 0) throw ValidationError("posterior_summary: chain has no draws");
  std::vector<SummaryRow> rows;
  rows.reserve(static_cast<std::size_t>(chain.parameters()));
  for (Eigen::Index j = 0; j < chain.parameters(); ++j)
    rows.push_back(summarize(chain.labels[static_cast<std::size_t>(j)], column(chain.draws, j)));
  return rows;
}

/// Per-column frequency of inclusion over draws of 0/1 flags.
inline Eigen::VectorXd inclusion_probabilities(const Eigen::MatrixXd& gamma_draws) {
  if (gamma_draws.rows() == 0) throw ValidationError("inclusion_probabilities: no draws");
  return gamma_draws.colwise().mean().transpose();
}

/// Pearson correlation; 0 if either series is constant.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size()) throw ValidationError("pearson: series must be non-empty and equal length");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace latentdlm
