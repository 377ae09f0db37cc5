#include <gtest/gtest.h>

#include <random>

#include "latentdlm/lag_design.hpp"

using namespace latentdlm;

namespace {

// Naive recursive Cox-de Boor on a clamped knot vector, right-closed at the end.
double bspline_oracle(const std::vector<double>& t, int i, int k, double x) {
  if (k == 0) {
    const bool last = x == t.back() && t[i] < t[i + 1] && t[i + 1] == t.back();
    return (t[i] <= x && x < t[i + 1]) || last ? 1.0 : 0.0;
  }
  double out = 0.0;
  if (t[i + k] > t[i]) out += (x - t[i]) / (t[i + k] - t[i]) * bspline_oracle(t, i, k - 1, x);
  if (t[i + k + 1] > t[i + 1]) out += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * bspline_oracle(t, i + 1, k - 1, x);
  return out;
}

TimeSeries random_series(std::size_t len, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n;
  TimeSeries z{"z", {}};
  for (std::size_t i = 0; i < len; ++i) z.values.push_back(n(gen));
  return z;
}

}  // namespace

TEST(LagMatrix, SmallExample) {
  const LagMatrix m = build_lag_matrix({"z", {1, 2, 3, 4, 5}}, {1, 2, 0});
  Eigen::MatrixXd expected(3, 2);
  expected << 5, 4, 4, 3, 3, 2;
  EXPECT_EQ(m.entries, expected);
  EXPECT_EQ(m.source, "z");
}

TEST(LagMatrix, ZeroLagIsReversedSeries) {
  const TimeSeries z = random_series(10, 3);
  const LagMatrix m = build_lag_matrix(z, {0, 6, 0});
  ASSERT_EQ(m.entries.cols(), 1);
  for (int i = 0; i <= 6; ++i) EXPECT_EQ(m.entries(i, 0), z.values[9 - i]);
}

TEST(LagMatrix, CellIdentityOnRandomInput) {
  const TimeSeries z = random_series(100, 11);
  const LagMatrix m = build_lag_matrix(z, {40, 59, 0});
  ASSERT_EQ(m.entries.rows(), 60);
  ASSERT_EQ(m.entries.cols(), 41);
  for (int i = 0; i < 60; ++i)
    for (int k = 0; k <= 40; ++k) EXPECT_EQ(m.entries(i, k), z.values[99 - i - k]);
}

TEST(LagMatrix, OffsetShiftsWindow) {
  const TimeSeries z = random_series(30, 5);
  const LagMatrix m = build_lag_matrix(z, {3, 10, 2});
  for (int i = 0; i <= 10; ++i)
    for (int k = 0; k <= 3; ++k) EXPECT_EQ(m.entries(i, k), z.values[29 - 2 - i - k]);
}

TEST(LagMatrix, InsufficientHistoryNamesShortfall) {
  try {
    build_lag_matrix({"pm10", {1, 2, 3}}, {2, 2, 0});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("pm10"), std::string::npos);
    EXPECT_NE(msg.find("short by 2"), std::string::npos);
  }
}

TEST(Knots, Percentiles) {
  EXPECT_EQ(place_knots(40, 3), (std::vector<double>{10, 20, 30}));
  EXPECT_EQ(place_knots(40, 1), (std::vector<double>{20}));
  EXPECT_EQ(place_knots(4, 3), (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(place_knots(10, 0).empty());
}

TEST(Knots, StrictlyInteriorAndAscending) {
  for (std::size_t tau = 2; tau <= 45; ++tau)
    for (std::size_t n = 0; n < tau && n <= 6; ++n) {
      const auto k = place_knots(tau, n);
      ASSERT_EQ(k.size(), n);
      for (std::size_t j = 0; j < k.size(); ++j) {
        EXPECT_GT(k[j], 0.0);
        EXPECT_LT(k[j], static_cast<double>(tau));
        if (j) EXPECT_GT(k[j], k[j - 1]);
      }
    }
}

TEST(Knots, RejectsBadInput) {
  EXPECT_THROW(place_knots(0, 1), ValidationError);
  EXPECT_THROW(place_knots(3, 3), ValidationError);
}

TEST(BSpline, SevenColumnsForCubicWithThreeKnots) {
  const BasisMatrix b = bspline_basis(40, 3, place_knots(40, 3));
  EXPECT_EQ(b.entries.rows(), 41);
  EXPECT_EQ(b.entries.cols(), 7);
}

TEST(BSpline, ConstantBasis) {
  const BasisMatrix b = bspline_basis(40, 0, {});
  ASSERT_EQ(b.entries.cols(), 1);
  EXPECT_TRUE((b.entries.array() == 1.0).all());
}

TEST(BSpline, PartitionOfUnityAndNonNegative) {
  for (int degree = 0; degree <= 3; ++degree)
    for (std::size_t n = 0; n <= 5; ++n) {
      const BasisMatrix b = bspline_basis(40, degree, place_knots(40, n));
      EXPECT_EQ(b.entries.cols(), degree + 1 + static_cast<int>(n));
      for (Eigen::Index r = 0; r < b.entries.rows(); ++r) EXPECT_NEAR(b.entries.row(r).sum(), 1.0, 1e-12);
      EXPECT_GE(b.entries.minCoeff(), 0.0);
    }
}

TEST(BSpline, MatchesRecursiveOracle) {
  for (int degree = 0; degree <= 3; ++degree)
    for (std::size_t n : {0u, 1u, 3u, 5u}) {
      const std::size_t tau = 20;
      const auto inner = place_knots(tau, n);
      const BasisMatrix b = bspline_basis(tau, degree, inner);
      std::vector<double> t(degree + 1, 0.0);
      t.insert(t.end(), inner.begin(), inner.end());
      t.insert(t.end(), degree + 1, static_cast<double>(tau));
      for (std::size_t lag = 0; lag <= tau; ++lag)
        for (int j = 0; j < b.entries.cols(); ++j)
          EXPECT_NEAR(b.entries(static_cast<Eigen::Index>(lag), j), bspline_oracle(t, j, degree, static_cast<double>(lag)),
                      1e-12)
              << "degree " << degree << " knots " << n << " lag " << lag << " col " << j;
    }
}

TEST(Design, FullSizeColumnCount) {
  const std::size_t tau = 40, n = 99;
  const BasisMatrix basis = bspline_basis(tau, 3, place_knots(tau, 3));
  std::vector<DynamicTerm> dyn;
  for (const char* name : {"rhum", "pm10", "o3"})
    dyn.push_back({build_lag_matrix(random_series(n + tau + 1, 7), {tau, n, 0}), basis});
  for (std::size_t d = 0; d < dyn.size(); ++d) dyn[d].lags.source = std::vector<std::string>{"rhum", "pm10", "o3"}[d];
  std::vector<StaticColumn> statics{{"s1", Eigen::VectorXd::Random(n + 1)}, {"s2", Eigen::VectorXd::Random(n + 1)}};
  const DesignMatrix d = assemble_design(statics, true, dyn);
  EXPECT_EQ(d.cols(), 24);
  EXPECT_EQ(d.rows(), static_cast<Eigen::Index>(n + 1));
  const auto labels = d.labels();
  EXPECT_EQ(labels[0], "intercept");
  EXPECT_EQ(labels[1], "s1");
  EXPECT_EQ(labels[3], "rhum.b0");
  EXPECT_EQ(labels[23], "o3.b6");
  EXPECT_EQ(d.columns_of("pm10").size(), 7u);
  EXPECT_EQ(d.columns_of("pm10").front(), 10);
}

TEST(Design, StaticsOnlyIsExact) {
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, 0, 1), b = Eigen::VectorXd::LinSpaced(5, 3, -1);
  const DesignMatrix d = assemble_design({{"a", a}, {"b", b}}, true, {});
  Eigen::MatrixXd expected(5, 3);
  expected << Eigen::VectorXd::Ones(5), a, b;
  EXPECT_EQ(d.X, expected);
}

TEST(Design, DynamicBlockIsProduct) {
  const std::size_t tau = 10, n = 30;
  const LagMatrix z = build_lag_matrix(random_series(n + tau + 1, 9), {tau, n, 0});
  const BasisMatrix basis = bspline_basis(tau, 2, place_knots(tau, 2));
  const DesignMatrix d = assemble_design({}, false, {{z, basis}});
  for (Eigen::Index j = 0; j < basis.entries.cols(); ++j) {
    const Eigen::VectorXd oracle = z.entries * basis.entries.col(j);
    EXPECT_LT((d.X.col(j) - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Design, DeterministicAndRowChecked) {
  const std::size_t tau = 5, n = 12;
  const LagMatrix z = build_lag_matrix(random_series(n + tau + 1, 2), {tau, n, 0});
  const BasisMatrix basis = bspline_basis(tau, 3, place_knots(tau, 1));
  const StaticColumn s{"s", Eigen::VectorXd::LinSpaced(n + 1, 0, 1)};
  const DesignMatrix a = assemble_design({s}, true, {{z, basis}});
  const DesignMatrix b = assemble_design({s}, true, {{z, basis}});
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.labels(), b.labels());
  EXPECT_THROW(assemble_design({{"short", Eigen::VectorXd::Ones(3)}}, true, {{z, basis}}), ValidationError);
  EXPECT_THROW(assemble_design({}, true, {}), ValidationError);
  EXPECT_EQ(assemble_design({}, true, {}, 4).X, Eigen::MatrixXd::Ones(4, 1));
}

TEST(LagResponse, ZeroUnitAndDotProduct) {
  const BasisMatrix b = bspline_basis(40, 3, place_knots(40, 3));
  EXPECT_TRUE(lag_response_curve(b, Eigen::VectorXd::Zero(7)).isZero(0.0));
  for (int j = 0; j < 7; ++j) EXPECT_EQ(lag_response_curve(b, Eigen::VectorXd::Unit(7, j)), b.entries.col(j));
  const Eigen::VectorXd beta = Eigen::VectorXd::Random(7);
  const Eigen::VectorXd curve = lag_response_curve(b, beta);
  for (Eigen::Index k = 0; k <= 40; ++k) {
    double dot = 0.0;
    for (int j = 0; j < 7; ++j) dot += b.entries(k, j) * beta(j);
    EXPECT_NEAR(curve(k), dot, 1e-12);
  }
  EXPECT_THROW(lag_response_curve(b, Eigen::VectorXd::Zero(6)), ValidationError);
}

TEST(LagResponse, Linear) {
  const BasisMatrix b = bspline_basis(20, 3, place_knots(20, 2));
  std::mt19937 gen(4);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd b1(6), b2(6);
    for (int j = 0; j < 6; ++j) {
      b1(j) = n(gen);
      b2(j) = n(gen);
    }
    const double x = n(gen), y = n(gen);
    const Eigen::VectorXd lhs = lag_response_curve(b, x * b1 + y * b2);
    const Eigen::VectorXd rhs = x * lag_response_curve(b, b1) + y * lag_response_curve(b, b2);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}
