#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "latentdlm/io.hpp"
#include "latentdlm/runner.hpp"

using namespace latentdlm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latentdlm_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

fs::path small_dataset(const fs::path& dir, ResponseKind kind, std::size_t n = 120, std::size_t tau = 6) {
  SimConfig c;
  c.kind = kind;
  c.n = n;
  c.tau = tau;
  RngStream rng(21);
  const auto d = simulate_dataset(c, rng);
  const fs::path p = dir / "data.csv";
  write_dataset_csv(p.string(), d);
  return p;
}

RunConfig quick(std::size_t tau = 6) {
  RunConfig c;
  c.iterations = 60;
  c.burn_in = 20;
  c.thin = 2;
  c.chains = 2;
  c.tau = tau;
  c.knots = 1;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Numbers, RoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(std::nan("")), "NA");
  EXPECT_EQ(format_number(1.0), "1");
}

TEST(Csv, ReadWithMissingTokens) {
  const auto dir = scratch("csv");
  write_text(dir / "t.csv", "\xEF\xBB\xBF" "a, b\n1,NA\n\n2.5,3\n");
  const auto t = read_csv((dir / "t.csv").string());
  ASSERT_EQ(t.header.size(), 2u);
  EXPECT_EQ(t.header[1], "b");
  EXPECT_EQ(t.rows.size(), 2u);
  const auto b = t.numeric("b");
  EXPECT_TRUE(std::isnan(b[0]));
  EXPECT_EQ(b[1], 3.0);
  EXPECT_THROW(t.numeric("c"), ValidationError);
}

TEST(Csv, RejectsRaggedAndUnparsable) {
  const auto dir = scratch("csvbad");
  write_text(dir / "r.csv", "a,b\n1\n");
  EXPECT_THROW(read_csv((dir / "r.csv").string()), ValidationError);
  write_text(dir / "u.csv", "a\nabc\n");
  EXPECT_THROW(read_csv((dir / "u.csv").string()).numeric("a"), ValidationError);
  EXPECT_THROW(read_csv((dir / "missing.csv").string()), ValidationError);
}

TEST(Truth, JsonRoundTrip) {
  SimConfig c;
  c.n = 20;
  c.tau = 4;
  RngStream rng(1);
  const auto d = simulate_dataset(c, rng);
  const auto t = truth_from_json(to_json(d.truth));
  EXPECT_EQ(t.n, 20u);
  EXPECT_EQ(t.dynamics.size(), 3u);
  EXPECT_EQ(t.dynamics[2].curve.weights, d.truth.dynamics[2].curve.weights);
  EXPECT_EQ(t.xi, d.truth.xi);
  EXPECT_THROW(truth_from_json(Json::object()), ValidationError);
}

TEST(Dataset, HistoryRowsAndAlignment) {
  const auto dir = scratch("align");
  SimConfig c;
  c.n = 15;
  c.tau = 3;
  RngStream rng(2);
  const auto d = simulate_dataset(c, rng);
  write_dataset_csv((dir / "d.csv").string(), d);
  const auto t = read_csv((dir / "d.csv").string());
  EXPECT_EQ(t.rows.size(), 18u);
  EXPECT_EQ(t.header[0], "y");
  EXPECT_EQ(t.header.back(), "dyn_o3");
  EXPECT_EQ(t.rows[0][0], "");

  RunConfig rc = quick(3);
  const auto data = prepare_data(t, rc);
  ASSERT_EQ(data.y.size(), 15u);
  // design row 0 is the last response
  EXPECT_EQ(data.y[0], d.y[14]);
  EXPECT_EQ(data.y[14], d.y[0]);
  EXPECT_EQ(data.design.cols(), 1 + 2 + 3 * 5);
  EXPECT_TRUE(data.locked[0]);
  EXPECT_FALSE(data.locked[1]);
}

TEST(Prepare, ResponseValidation) {
  CsvTable t;
  t.source = "mem";
  t.header = {"y", "static_1", "dyn_a"};
  for (int i = 0; i < 10; ++i)
    t.rows.push_back({i < 2 ? "" : std::to_string(i % 3), "1", std::to_string(i)});
  RunConfig c = quick(2);
  c.knots = 0;
  c.degree = 1;
  EXPECT_NO_THROW(prepare_data(t, c));
  t.rows[5][0] = "-1";
  EXPECT_THROW(prepare_data(t, c), ValidationError);
  t.rows[5][0] = "1.5";
  EXPECT_THROW(prepare_data(t, c), ValidationError);
  t.rows[5][0] = "2";
  c.model = ModelKind::bqr;
  EXPECT_THROW(prepare_data(t, c), ValidationError);
  c.dichotomize = 1.0;
  const auto d = prepare_data(t, c);
  for (double y : d.y) EXPECT_TRUE(y == 0.0 || y == 1.0);
  t.rows[6][0] = "NA";
  EXPECT_THROW(prepare_data(t, c), ValidationError);
}

TEST(Prepare, TooFewRows) {
  CsvTable t;
  t.header = {"y", "dyn_a"};
  for (int i = 0; i < 5; ++i) t.rows.push_back({"1", "1"});
  EXPECT_THROW(prepare_data(t, quick(6)), ValidationError);
}

TEST(Prepare, Imputation) {
  CsvTable t;
  t.header = {"y", "static_1", "dyn_a"};
  for (int i = 0; i < 8; ++i) t.rows.push_back({i < 2 ? "" : "1", "2", "1"});
  t.rows[4][1] = "NA";
  t.rows[3][2] = "";
  RunConfig c = quick(2);
  c.knots = 0;
  c.degree = 1;
  EXPECT_THROW(prepare_data(t, c), ValidationError);
  c.imputation = Imputation::mean;
  auto d = prepare_data(t, c);
  EXPECT_TRUE(d.design.X.allFinite());
  c.imputation = Imputation::forward_fill;
  d = prepare_data(t, c);
  EXPECT_TRUE(d.design.X.allFinite());
  EXPECT_EQ(d.design.X(3, 1), 2.0);  // table row 4
}

TEST(Prepare, LockedCovariates) {
  const auto dir = scratch("lock");
  const auto path = small_dataset(dir, ResponseKind::count);
  RunConfig c = quick();
  c.lock = {"dyn_pm10"};
  const auto d = prepare_data(read_csv(path.string()), c);
  for (auto j : d.design.columns_of("dyn_pm10")) EXPECT_TRUE(d.locked[static_cast<std::size_t>(j)]);
  c.lock = {"nope"};
  EXPECT_THROW(prepare_data(read_csv(path.string()), c), ValidationError);
}

TEST(Config, SetAndValidate) {
  RunConfig c;
  c.set("model", "bqr");
  c.set("iterations", "100");
  c.set("start", "full,random");
  c.set("fixed_xi", "none");
  EXPECT_EQ(c.model, ModelKind::bqr);
  EXPECT_EQ(c.resolved_burn_in(), 50);
  EXPECT_EQ(c.start.size(), 2u);
  EXPECT_THROW(c.set("bogus", "1"), ValidationError);
  EXPECT_THROW(c.set("iterations", "ten"), ValidationError);
  EXPECT_THROW(c.set("imputation", "zero"), ValidationError);
  c.set("burn_in", "100");
  EXPECT_THROW(c.validate(), ValidationError);
  c.set("burn_in", "10");
  c.set("q", "1");
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, Presets) {
  RunConfig c;
  c.set("preset", "real-data");
  EXPECT_EQ(c.iterations, 100000);
  EXPECT_EQ(c.resolved_burn_in(), 50000);
  EXPECT_EQ(c.thin, 10);
  EXPECT_EQ(c.chains, 4);
  EXPECT_THROW(c.set("preset", "quick"), ValidationError);
}

TEST(Config, FileLoading) {
  const auto dir = scratch("cfg");
  write_text(dir / "a.cfg", "# run\nmodel = bqr\n\nq = 0.5  # median\n");
  RunConfig c;
  load_config_file((dir / "a.cfg").string(), c);
  EXPECT_EQ(c.model, ModelKind::bqr);
  EXPECT_EQ(c.q, 0.5);
  write_text(dir / "b.cfg", "model bqr\n");
  EXPECT_THROW(load_config_file((dir / "b.cfg").string(), c), ValidationError);
}

TEST(Chains, StartStrategies) {
  RngStream rng(1);
  const std::vector<bool> locked{true, false, false, false};
  const auto a = starting_flags(locked, StartStrategy::intercept_only, rng);
  EXPECT_EQ(a.flags, (std::vector<bool>{true, false, false, false}));
  const auto b = starting_flags(locked, StartStrategy::full, rng);
  EXPECT_EQ(b.flags, (std::vector<bool>(4, true)));
}

TEST(Chains, ShapesAndThreadIndependence) {
  const auto dir = scratch("chains");
  const auto path = small_dataset(dir, ResponseKind::count);
  RunConfig c = quick();
  c.chains = 3;
  const auto data = prepare_data(read_csv(path.string()), c);
  const auto serial = run_chains(data, c);
  c.threads = 3;
  const auto parallel = run_chains(data, c);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(serial[i].params.rows(), 20);
    EXPECT_EQ(serial[i].params.cols(), data.design.cols() + 1);
    EXPECT_EQ(serial[i].params, parallel[i].params);
    EXPECT_EQ(serial[i].gamma, parallel[i].gamma);
    EXPECT_TRUE(serial[i].params.allFinite());
  }
  EXPECT_NE(serial[0].params, serial[1].params);
}

TEST(Fit, WritesAllOutputs) {
  const auto dir = scratch("fit");
  const auto path = small_dataset(dir, ResponseKind::count);
  const auto out = run_fit(path.string(), quick(), (dir / "out").string());
  for (const char* f : {"manifest.txt", "design.json", "chain_1.csv", "chain_2.csv", "summary.csv", "summary.json",
                        "inclusion.csv", "lag_response.csv"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  const auto draws = read_draws_file((dir / "out" / "chain_1.csv").string());
  EXPECT_EQ(draws.params.iterations(), 20);
  EXPECT_EQ(draws.params.labels.back(), "xi");
  EXPECT_EQ(draws.gamma.parameters(), out.data.design.cols());
  EXPECT_EQ(draws.params.draws, out.chains[0].params);  // shortest round trip is exact
  const auto lag = read_csv((dir / "out" / "lag_response.csv").string());
  EXPECT_EQ(lag.rows.size(), 3u * 7u);
  const auto summary = read_csv((dir / "out" / "summary.csv").string());
  EXPECT_EQ(summary.rows.size(), out.labels.size());
}

TEST(Fit, BinaryModelNoXi) {
  const auto dir = scratch("fitbqr");
  const auto path = small_dataset(dir, ResponseKind::binary);
  RunConfig c = quick();
  c.model = ModelKind::bqr;
  const auto out = run_fit(path.string(), c, (dir / "out").string());
  EXPECT_EQ(out.labels.back(), "dyn_o3.b4");
  EXPECT_EQ(out.chains[0].params.cols(), out.data.design.cols());
}

TEST(LagResponse, MatchesDrawsByHand) {
  const auto dir = scratch("lagresp");
  const auto path = small_dataset(dir, ResponseKind::count);
  const auto out = run_fit(path.string(), quick(), (dir / "out").string());
  const Json design = read_json((dir / "out" / "design.json").string());
  std::vector<Chain> chains;
  for (const auto& c : out.chains) chains.push_back(Chain{c.params, out.labels, 2});
  const auto rows = lag_response_summary(design, chains, 0.9);
  const auto& b = out.data.bases[1].basis.entries;
  const auto cols = out.data.design.columns_of("dyn_pm10");
  double expected = 0.0;
  for (const auto& c : out.chains)
    for (Eigen::Index i = 0; i < c.params.rows(); ++i)
      for (Eigen::Index k = 0; k < b.cols(); ++k) expected += b(2, k) * c.params(i, cols[static_cast<std::size_t>(k)]);
  expected /= 40.0;
  const auto& r = rows[7 + 2];
  EXPECT_EQ(r.covariate, "dyn_pm10");
  EXPECT_EQ(r.lag, 2u);
  EXPECT_NEAR(r.mean, expected, 1e-12);
  std::vector<double> v;
  for (const auto& c : out.chains)
    for (Eigen::Index i = 0; i < c.params.rows(); ++i) {
      double w = 0.0;
      for (Eigen::Index k = 0; k < b.cols(); ++k) w += b(2, k) * c.params(i, cols[static_cast<std::size_t>(k)]);
      v.push_back(w);
    }
  std::sort(v.begin(), v.end());
  EXPECT_NEAR(r.lower, sorted_quantile(v, 0.05), 1e-12);
  EXPECT_NEAR(r.upper, sorted_quantile(v, 0.95), 1e-12);
}

TEST(Diagnose, ReportSections) {
  const auto dir = scratch("diag");
  const auto path = small_dataset(dir, ResponseKind::count);
  RunConfig c = quick();
  c.iterations = 260;
  c.burn_in = 50;
  c.thin = 2;
  run_fit(path.string(), c, (dir / "out").string());
  const auto lines = diagnose({(dir / "out" / "chain_1.csv").string(), (dir / "out" / "chain_2.csv").string()},
                              {{"static_1", "static_2"}});
  std::size_t ineff = 0, incl = 0, corr = 0;
  for (const auto& l : lines) {
    if (l.section == "inefficiency") {
      ++ineff;
      // never-included columns are constant at zero
      if (l.value == "NA") EXPECT_EQ(l.note, "constant chain");
    }
    incl += l.section == "inclusion";
    corr += l.section == "correlation";
  }
  EXPECT_EQ(ineff, 2u * 19u);
  EXPECT_EQ(incl, 2u * 18u);
  EXPECT_EQ(corr, 4u);  // intercept:xi added automatically
  EXPECT_THROW(diagnose({(dir / "out" / "chain_1.csv").string()}, {{"a", "b"}}), ValidationError);
}

TEST(Diagnose, ShortChainMarkedUnavailable) {
  const auto dir = scratch("diagshort");
  const auto path = small_dataset(dir, ResponseKind::count);
  run_fit(path.string(), quick(), (dir / "out").string());
  const auto lines = diagnose({(dir / "out" / "chain_1.csv").string()});
  for (const auto& l : lines)
    if (l.section == "inefficiency") {
      EXPECT_EQ(l.value, "NA");
      EXPECT_NE(l.note.find("unavailable"), std::string::npos);
    }
  std::ostringstream os;
  write_report_csv(os, lines);
  EXPECT_EQ(os.str().rfind("section,chain,parameter,value,note\n", 0), 0u);
}
