#pragma once

// Lag matrices, B-spline bases over lag indices, and design assembly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/error.hpp"

namespace latentdlm {

struct TimeSeries {
  std::string name;
  std::vector<double> values;  // oldest first
};

struct LagSpec {
  std::size_t tau = 0;           // largest lag used, counted from start_offset
  std::size_t n = 0;             // response rows minus one
  std::size_t start_offset = 0;  // first lag used
};

struct LagMatrix {
  Eigen::MatrixXd entries;  // (n+1) x (tau+1)
  std::string source;
};

struct BasisMatrix {
  Eigen::MatrixXd entries;  // (tau+1) x (degree + 1 + #knots)
  int degree = 0;
  std::vector<double> interior_knots;
};

enum class ColumnKind { intercept, static_covariate, basis_component };

struct ColumnInfo {
  std::string covariate;
  ColumnKind kind = ColumnKind::static_covariate;
  int basis_index = -1;  // only meaningful for basis components

  std::string label() const {
    switch (kind) {
      case ColumnKind::intercept:
        return "intercept";
      case ColumnKind::static_covariate:
        return covariate;
      case ColumnKind::basis_component:
        return covariate + ".b" + std::to_string(basis_index);
    }
    return covariate;
  }
};

struct StaticColumn {
  std::string name;
  Eigen::VectorXd values;
};

struct DynamicTerm {
  LagMatrix lags;
  BasisMatrix basis;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<ColumnInfo> group_map;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(group_map.size());
    for (const auto& c : group_map) out.push_back(c.label());
    return out;
  }

  /// Column indices belonging to a named covariate, in basis order.
  std::vector<Eigen::Index> columns_of(const std::string& covariate) const {
    std::vector<Eigen::Index> out;
    for (std::size_t j = 0; j < group_map.size(); ++j)
      if (group_map[j].covariate == covariate) out.push_back(static_cast<Eigen::Index>(j));
    return out;
  }
};

/// Row i holds z[T - start_offset - i - k] for k = 0..tau, where T is the
/// last index of the series; row 0 is the most recent response time.
inline LagMatrix build_lag_matrix(const TimeSeries& z, const LagSpec& spec) {
  const std::size_t needed = spec.n + spec.tau + spec.start_offset + 1;
  if (z.values.size() < needed) {
    throw ValidationError("insufficient history for lag matrix of '" + z.name + "': need " +
                          std::to_string(needed) + " points, have " +
                          std::to_string(z.values.size()) + " (short by " +
                          std::to_string(needed - z.values.size()) + ")");
  }
  const std::size_t T = z.values.size() - 1;
  LagMatrix out;
  out.source = z.name;
  out.entries.resize(static_cast<Eigen::Index>(spec.n + 1), static_cast<Eigen::Index>(spec.tau + 1));
  for (std::size_t i = 0; i <= spec.n; ++i)
    for (std::size_t k = 0; k <= spec.tau; ++k)
      out.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          z.values[T - spec.start_offset - i - k];
  return out;
}

/// Evenly spaced interior knots over the lag range [0, tau]: knot j sits at
/// the j/(n_knots+1) quantile, rounded to the nearest half-integer and kept
/// strictly inside (0, tau).
inline std::vector<double> place_knots(std::size_t tau, std::size_t n_knots) {
  if (tau < 1) throw ValidationError("place_knots: tau must be at least 1");
  if (n_knots >= tau && n_knots > 0)
    throw ValidationError("place_knots: too many knots (" + std::to_string(n_knots) +
                          ") for tau = " + std::to_string(tau));
  std::vector<double> knots;
  knots.reserve(n_knots);
  const double t = static_cast<double>(tau);
  for (std::size_t j = 1; j <= n_knots; ++j) {
    const double pos = t * static_cast<double>(j) / static_cast<double>(n_knots + 1);
    double rounded = std::round(2.0 * pos) / 2.0;
    rounded = std::clamp(rounded, 0.5, t - 0.5);
    knots.push_back(rounded);
  }
  return knots;
}

/// B-spline basis with clamped boundary knots at 0 and tau, evaluated at the
/// integer lags 0..tau.
inline BasisMatrix bspline_basis(std::size_t tau, int degree, const std::vector<double>& interior_knots) {
  if (degree < 0) throw ValidationError("bspline_basis: degree must be non-negative");
  if (tau < 1) throw ValidationError("bspline_basis: tau must be at least 1");
  const double t_max = static_cast<double>(tau);
  for (std::size_t j = 0; j < interior_knots.size(); ++j) {
    const double k = interior_knots[j];
    if (!(k > 0.0 && k < t_max))
      throw ValidationError("bspline_basis: knot " + std::to_string(k) + " outside (0, tau)");
    if (j > 0 && !(k > interior_knots[j - 1]))
      throw ValidationError("bspline_basis: knots must be strictly ascending");
  }

  const int p = degree;
  std::vector<double> knots;
  knots.insert(knots.end(), static_cast<std::size_t>(p + 1), 0.0);
  knots.insert(knots.end(), interior_knots.begin(), interior_knots.end());
  knots.insert(knots.end(), static_cast<std::size_t>(p + 1), t_max);
  const int n_basis = p + 1 + static_cast<int>(interior_knots.size());

  BasisMatrix out;
  out.degree = degree;
  out.interior_knots = interior_knots;
  out.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tau + 1), n_basis);

  std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
  std::vector<double> values(static_cast<std::size_t>(p + 1));
  for (std::size_t row = 0; row <= tau; ++row) {
    const double x = static_cast<double>(row);
    // knot span: largest s with knots[s] <= x < knots[s+1]; the right end
    // belongs to the last non-empty span
    int span = n_basis - 1;
    if (x < t_max) {
      span = p;
      while (span + 1 < n_basis && knots[static_cast<std::size_t>(span + 1)] <= x) ++span;
    }
    // Cox-de Boor triangle of the p+1 non-zero functions on this span
    values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[static_cast<std::size_t>(j)] = x - knots[static_cast<std::size_t>(span + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const double temp = values[static_cast<std::size_t>(r)] / denom;
        values[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - r)] * temp;
      }
      values[static_cast<std::size_t>(j)] = saved;
    }
    for (int j = 0; j <= p; ++j)
      out.entries(static_cast<Eigen::Index>(row), span - p + j) = values[static_cast<std::size_t>(j)];
  }
  return out;
}

/// X = [intercept | statics | Z1 B1 | Z2 B2 | ...] in declaration order.
/// `rows` is only needed for an intercept-only design.
inline DesignMatrix assemble_design(const std::vector<StaticColumn>& statics, bool include_intercept,
                                    const std::vector<DynamicTerm>& dynamics,
                                    std::optional<Eigen::Index> rows = std::nullopt) {
  std::optional<Eigen::Index> n = rows;
  auto check_rows = [&n](Eigen::Index r, const std::string& what) {
    if (!n) {
      n = r;
    } else if (*n != r) {
      throw ValidationError("assemble_design: row-count mismatch for '" + what + "' (" +
                            std::to_string(r) + " vs " + std::to_string(*n) + ")");
    }
  };
  Eigen::Index width = include_intercept ? 1 : 0;
  for (const auto& s : statics) {
    check_rows(s.values.size(), s.name);
    ++width;
  }
  for (const auto& d : dynamics) {
    check_rows(d.lags.entries.rows(), d.lags.source);
    if (d.lags.entries.cols() != d.basis.entries.rows())
      throw ValidationError("assemble_design: basis for '" + d.lags.source +
                            "' has wrong number of lag rows");
    width += d.basis.entries.cols();
  }
  if (!n) throw ValidationError("assemble_design: cannot infer row count from an empty design");

  DesignMatrix out;
  out.X.resize(*n, width);
  out.group_map.reserve(static_cast<std::size_t>(width));
  Eigen::Index col = 0;
  if (include_intercept) {
    out.X.col(col++).setOnes();
    out.group_map.push_back({"intercept", ColumnKind::intercept, -1});
  }
  for (const auto& s : statics) {
    out.X.col(col++) = s.values;
    out.group_map.push_back({s.name, ColumnKind::static_covariate, -1});
  }
  for (const auto& d : dynamics) {
    const Eigen::Index w = d.basis.entries.cols();
    out.X.middleCols(col, w).noalias() = d.lags.entries * d.basis.entries;
    for (Eigen::Index j = 0; j < w; ++j)
      out.group_map.push_back({d.lags.source, ColumnKind::basis_component, static_cast<int>(j)});
    col += w;
  }
  return out;
}

/// curve(k) = sum_j basis(k, j) * beta_d(j)
inline Eigen::VectorXd lag_response_curve(const BasisMatrix& basis, const Eigen::VectorXd& beta_d) {
  if (beta_d.size() != basis.entries.cols())
    throw ValidationError("lag_response_curve: expected " + std::to_string(basis.entries.cols()) +
                          " coefficients, got " + std::to_string(beta_d.size()));
  return basis.entries * beta_d;
}

}  // namespace latentdlm
