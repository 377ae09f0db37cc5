#pragma once

// Batch fitting: run configuration, dataset preparation, multi-chain
// orchestration and the output files written by `fit`, `diagnose` and
// `lag-response`.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "latentdlm/bqr_model.hpp"
#include "latentdlm/diagnostics.hpp"
#include "latentdlm/error.hpp"
#include "latentdlm/io.hpp"
#include "latentdlm/lag_design.hpp"
#include "latentdlm/nb_model.hpp"
#include "latentdlm/rng.hpp"
#include "latentdlm/variable_selection.hpp"

namespace latentdlm {

enum class ModelKind { nb, bqr };
enum class StartStrategy { intercept_only, full, random };
enum class Imputation { none, mean, forward_fill };

inline std::string to_string(ModelKind m) { return m == ModelKind::nb ? "nb" : "bqr"; }

inline std::string to_string(StartStrategy s) {
  switch (s) {
    case StartStrategy::intercept_only:
      return "intercept";
    case StartStrategy::full:
      return "full";
    case StartStrategy::random:
      return "random";
  }
  return "random";
}

inline std::string to_string(Imputation i) {
  switch (i) {
    case Imputation::none:
      return "none";
    case Imputation::mean:
      return "mean";
    case Imputation::forward_fill:
      return "ffill";
  }
  return "none";
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : split(s, ','))
    if (!f.empty()) out.push_back(f);
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ValidationError("config '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ValidationError("config '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

struct RunConfig {
  ModelKind model = ModelKind::nb;
  long long iterations = 50000;
  std::optional<long long> burn_in;  // defaults to iterations / 2
  long long thin = 10;
  int chains = 4;
  std::vector<StartStrategy> start{StartStrategy::intercept_only, StartStrategy::full, StartStrategy::random,
                                   StartStrategy::random};
  double prior_variance = 100.0;
  double inclusion_prior = 0.5;
  double xi_shape = 2.0;
  double xi_rate = 1.0 / 50.0;
  std::optional<double> fixed_xi;
  double q = 0.9;
  std::size_t tau = 40;
  std::size_t start_offset = 0;
  std::size_t knots = 3;
  int degree = 3;
  std::uint64_t seed = 1;
  Imputation imputation = Imputation::none;
  std::optional<double> dichotomize;
  std::string response = "y";
  std::vector<std::string> statics;   // empty: every column named static_*
  std::vector<std::string> dynamics;  // empty: every column named dyn_*
  bool intercept = true;
  bool lock_intercept = true;
  std::vector<std::string> lock;  // covariates whose columns are always included
  bool selection = true;
  bool center_dynamics = false;
  int threads = 0;  // 0: one per hardware thread

  long long resolved_burn_in() const { return burn_in.value_or(iterations / 2); }

  /// Set one key from its text form; config files and CLI flags share this.
  void set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    using namespace detail;
    if (key == "model") {
      if (v == "nb") model = ModelKind::nb;
      else if (v == "bqr") model = ModelKind::bqr;
      else throw ValidationError("config 'model': expected nb or bqr, got '" + v + "'");
    } else if (key == "iterations") {
      iterations = parse_int(key, v);
    } else if (key == "burn_in") {
      burn_in = parse_int(key, v);
    } else if (key == "thin") {
      thin = parse_int(key, v);
    } else if (key == "chains") {
      chains = static_cast<int>(parse_int(key, v));
    } else if (key == "start") {
      start.clear();
      for (const auto& s : split_list(v)) {
        if (s == "intercept" || s == "intercept-only") start.push_back(StartStrategy::intercept_only);
        else if (s == "full") start.push_back(StartStrategy::full);
        else if (s == "random") start.push_back(StartStrategy::random);
        else throw ValidationError("config 'start': unknown strategy '" + s + "'");
      }
    } else if (key == "prior_variance") {
      prior_variance = parse_double(key, v);
    } else if (key == "inclusion_prior") {
      inclusion_prior = parse_double(key, v);
    } else if (key == "xi_shape") {
      xi_shape = parse_double(key, v);
    } else if (key == "xi_rate") {
      xi_rate = parse_double(key, v);
    } else if (key == "fixed_xi") {
      if (v.empty() || v == "none") fixed_xi.reset();
      else fixed_xi = parse_double(key, v);
    } else if (key == "q") {
      q = parse_double(key, v);
    } else if (key == "tau") {
      tau = static_cast<std::size_t>(parse_int(key, v));
    } else if (key == "start_offset") {
      start_offset = static_cast<std::size_t>(parse_int(key, v));
    } else if (key == "knots") {
      knots = static_cast<std::size_t>(parse_int(key, v));
    } else if (key == "degree") {
      degree = static_cast<int>(parse_int(key, v));
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(parse_int(key, v));
    } else if (key == "imputation") {
      if (v == "none") imputation = Imputation::none;
      else if (v == "mean") imputation = Imputation::mean;
      else if (v == "ffill" || v == "forward-fill") imputation = Imputation::forward_fill;
      else throw ValidationError("config 'imputation': expected none, mean or ffill, got '" + v + "'");
    } else if (key == "dichotomize") {
      if (v.empty() || v == "none") dichotomize.reset();
      else dichotomize = parse_double(key, v);
    } else if (key == "response") {
      response = v;
    } else if (key == "statics") {
      statics = split_list(v);
    } else if (key == "dynamics") {
      dynamics = split_list(v);
    } else if (key == "intercept") {
      intercept = parse_bool(key, v);
    } else if (key == "lock_intercept") {
      lock_intercept = parse_bool(key, v);
    } else if (key == "lock") {
      lock = split_list(v);
    } else if (key == "selection") {
      selection = parse_bool(key, v);
    } else if (key == "center_dynamics") {
      center_dynamics = parse_bool(key, v);
    } else if (key == "threads") {
      threads = static_cast<int>(parse_int(key, v));
    } else if (key == "preset") {
      apply_preset(v);
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }

  /// "simulation": 50000 sweeps; "real-data": 100000 sweeps. Both discard
  /// the first half and keep every 10th draw.
  void apply_preset(const std::string& name) {
    if (name == "simulation") {
      iterations = 50000;
    } else if (name == "real-data") {
      iterations = 100000;
    } else {
      throw ValidationError("unknown preset '" + name + "' (expected simulation or real-data)");
    }
    burn_in.reset();
    thin = 10;
    chains = 4;
  }

  void validate() const {
    if (iterations < 1) throw ValidationError("iterations must be positive");
    if (thin < 1) throw ValidationError("thin must be at least 1");
    const long long b = resolved_burn_in();
    if (b < 0 || b >= iterations) throw ValidationError("burn_in must satisfy 0 <= burn_in < iterations");
    if (chains < 1) throw ValidationError("chains must be at least 1");
    if (start.empty()) throw ValidationError("start strategies must not be empty");
    if (!(prior_variance > 0.0)) throw ValidationError("prior_variance must be positive");
    if (!(inclusion_prior > 0.0 && inclusion_prior < 1.0)) throw ValidationError("inclusion_prior must lie in (0, 1)");
    if (!(xi_shape > 0.0) || !(xi_rate > 0.0)) throw ValidationError("xi prior shape and rate must be positive");
    if (fixed_xi && !(*fixed_xi > 0.0)) throw ValidationError("fixed_xi must be positive");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("q must lie in (0, 1)");
    if (degree < 0) throw ValidationError("degree must be non-negative");
    if (threads < 0) throw ValidationError("threads must be non-negative");
  }

  /// Resolved key = value lines, in a fixed order.
  std::vector<std::pair<std::string, std::string>> manifest() const {
    std::vector<std::string> starts;
    for (auto s : start) starts.push_back(to_string(s));
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    return {
        {"model", to_string(model)},
        {"iterations", std::to_string(iterations)},
        {"burn_in", std::to_string(resolved_burn_in())},
        {"thin", std::to_string(thin)},
        {"chains", std::to_string(chains)},
        {"start", detail::join(starts)},
        {"prior_variance", format_number(prior_variance)},
        {"inclusion_prior", format_number(inclusion_prior)},
        {"xi_shape", format_number(xi_shape)},
        {"xi_rate", format_number(xi_rate)},
        {"fixed_xi", fixed_xi ? format_number(*fixed_xi) : "none"},
        {"q", format_number(q)},
        {"tau", std::to_string(tau)},
        {"start_offset", std::to_string(start_offset)},
        {"knots", std::to_string(knots)},
        {"degree", std::to_string(degree)},
        {"seed", std::to_string(seed)},
        {"imputation", to_string(imputation)},
        {"dichotomize", dichotomize ? format_number(*dichotomize) : "none"},
        {"response", response},
        {"statics", detail::join(statics)},
        {"dynamics", detail::join(dynamics)},
        {"intercept", b(intercept)},
        {"lock_intercept", b(lock_intercept)},
        {"lock", detail::join(lock)},
        {"selection", b(selection)},
        {"center_dynamics", b(center_dynamics)},
    };
  }
};

/// Flat `key = value` file; blank lines and `#` comments are ignored.
inline void load_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

// ---------------------------------------------------------------------------
// Dataset preparation

struct DynamicBasis {
  std::string name;
  BasisMatrix basis;
};

struct PreparedData {
  DesignMatrix design;
  std::vector<double> y;  // aligned to design rows: row i is time T - i
  std::vector<DynamicBasis> bases;
  std::vector<bool> locked;
};

namespace detail {

inline void impute(std::vector<double>& x, Imputation how, const std::string& name, std::size_t first_row,
                   std::size_t row_offset) {
  std::size_t first_missing = x.size();
  for (std::size_t i = first_row; i < x.size(); ++i)
    if (!std::isfinite(x[i])) {
      first_missing = i;
      break;
    }
  if (first_missing == x.size()) return;
  if (how == Imputation::none)
    throw ValidationError("column '" + name + "', row " + std::to_string(first_missing + row_offset) +
                          ": missing or non-finite value (set imputation = mean or ffill to fill)");
  if (how == Imputation::mean) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = first_row; i < x.size(); ++i)
      if (std::isfinite(x[i])) {
        sum += x[i];
        ++count;
      }
    if (count == 0) throw ValidationError("column '" + name + "': no observed values to impute from");
    const double mean = sum / static_cast<double>(count);
    for (std::size_t i = first_row; i < x.size(); ++i)
      if (!std::isfinite(x[i])) x[i] = mean;
    return;
  }
  std::optional<double> last;
  for (std::size_t i = first_row; i < x.size(); ++i) {
    if (std::isfinite(x[i])) {
      last = x[i];
    } else if (last) {
      x[i] = *last;
    }
  }
  // leading gap: carry the first observed value backwards
  std::optional<double> first;
  for (std::size_t i = first_row; i < x.size(); ++i)
    if (std::isfinite(x[i])) {
      first = x[i];
      break;
    }
  if (!first) throw ValidationError("column '" + name + "': no observed values to impute from");
  for (std::size_t i = first_row; i < x.size() && !std::isfinite(x[i]); ++i) x[i] = *first;
}

inline std::vector<std::string> prefixed_columns(const CsvTable& t, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& h : t.header)
    if (h.rfind(prefix, 0) == 0) out.push_back(h);
  return out;
}

}  // namespace detail

/// Builds the design from a time-ordered table. The first tau + start_offset
/// rows are history; each later row is one response, and design row i
/// corresponds to table row (last - i).
inline PreparedData prepare_data(const CsvTable& table, const RunConfig& config) {
  const std::size_t history = config.tau + config.start_offset;
  const std::size_t total = table.rows.size();
  if (total <= history)
    throw ValidationError(table.source + ": " + std::to_string(total) + " rows cannot cover " +
                          std::to_string(history) + " history rows plus at least one response");
  const std::size_t T = total - 1;
  const std::size_t n = total - 1 - history;
  constexpr std::size_t kHeaderRows = 2;  // 1-based line number of data row 0

  const auto statics = config.statics.empty() ? detail::prefixed_columns(table, "static_") : config.statics;
  const auto dynamics = config.dynamics.empty() ? detail::prefixed_columns(table, "dyn_") : config.dynamics;

  PreparedData out;
  std::vector<double> y = table.numeric(config.response);
  out.y.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const std::size_t r = T - i;
    const double v = y[r];
    if (!std::isfinite(v))
      throw ValidationError("column '" + config.response + "', row " + std::to_string(r + kHeaderRows) +
                            ": missing response");
    double value = v;
    if (config.dichotomize) value = v > *config.dichotomize ? 1.0 : 0.0;
    if (config.model == ModelKind::nb && (v < 0.0 || v != std::floor(v)))
      throw ValidationError("column '" + config.response + "', row " + std::to_string(r + kHeaderRows) +
                            ": negative binomial response must be a non-negative integer");
    if (config.model == ModelKind::bqr && value != 0.0 && value != 1.0)
      throw ValidationError("column '" + config.response + "', row " + std::to_string(r + kHeaderRows) +
                            ": binary response must be 0 or 1 (use dichotomize to threshold counts)");
    out.y[i] = value;
  }

  std::vector<StaticColumn> static_cols;
  for (const auto& name : statics) {
    auto v = table.numeric(name);
    detail::impute(v, config.imputation, name, history, kHeaderRows);
    StaticColumn col{name, Eigen::VectorXd(static_cast<Eigen::Index>(n + 1))};
    for (std::size_t i = 0; i <= n; ++i) col.values(static_cast<Eigen::Index>(i)) = v[T - i];
    static_cols.push_back(std::move(col));
  }

  std::vector<DynamicTerm> terms;
  if (!dynamics.empty()) {
    const auto knots = place_knots(config.tau, config.knots);
    const BasisMatrix basis = bspline_basis(config.tau, config.degree, knots);
    for (const auto& name : dynamics) {
      auto v = table.numeric(name);
      detail::impute(v, config.imputation, name, 0, kHeaderRows);
      if (config.center_dynamics) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double& x : v) x -= mean;
      }
      TimeSeries z{name, std::move(v)};
      terms.push_back({build_lag_matrix(z, {config.tau, n, config.start_offset}), basis});
      out.bases.push_back({name, basis});
    }
  }

  out.design = assemble_design(static_cols, config.intercept, terms, static_cast<Eigen::Index>(n + 1));
  const auto p = static_cast<std::size_t>(out.design.cols());
  if (p == 0) throw ValidationError("design has no columns");
  out.locked.assign(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    const auto& info = out.design.group_map[j];
    if (info.kind == ColumnKind::intercept && config.lock_intercept) out.locked[j] = true;
    for (const auto& name : config.lock)
      if (info.covariate == name) out.locked[j] = true;
  }
  for (const auto& name : config.lock)
    if (out.design.columns_of(name).empty()) throw ValidationError("lock: no covariate named '" + name + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Chains

struct ChainResult {
  int chain = 0;
  StartStrategy start = StartStrategy::random;
  Eigen::MatrixXd params;  // kept draws x (P [+ xi])
  Eigen::MatrixXd gamma;   // kept draws x P, 0/1
  double acceptance_rate = 0.0;
};

/// Raised from a chain with the state at the time of failure.
class ChainFailure : public NumericalError {
 public:
  ChainFailure(const std::string& what, Json state) : NumericalError(what), state_(std::move(state)) {}
  const Json& state() const { return state_; }

 private:
  Json state_;
};

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Json state_json(const NBState& s) {
  Json j;
  j["beta"] = to_std(s.beta);
  j["gamma"] = s.gamma.flags;
  j["xi"] = s.xi;
  j["omega"] = to_std(s.omega);
  j["psi"] = s.psi;
  return j;
}

inline Json state_json(const BQRState& s) {
  Json j;
  j["beta"] = to_std(s.beta);
  j["gamma"] = s.gamma.flags;
  j["ystar"] = to_std(s.ystar);
  j["nu"] = to_std(s.nu);
  return j;
}

inline InclusionVector starting_flags(const std::vector<bool>& locked, StartStrategy start, RngStream& rng) {
  InclusionVector g{std::vector<bool>(locked.size(), false), locked};
  for (std::size_t j = 0; j < locked.size(); ++j) {
    if (locked[j]) {
      g.flags[j] = true;
      continue;
    }
    switch (start) {
      case StartStrategy::intercept_only:
        break;
      case StartStrategy::full:
        g.flags[j] = true;
        break;
      case StartStrategy::random:
        g.flags[j] = rng.uniform() < 0.5;
        break;
    }
  }
  return g;
}

inline std::vector<std::string> parameter_labels(const PreparedData& data, ModelKind model) {
  auto labels = data.design.labels();
  if (model == ModelKind::nb) labels.push_back("xi");
  return labels;
}

/// Runs chain `index` (0-based) to completion. The chain owns its stream
/// (seed, index), so the result does not depend on scheduling.
inline ChainResult run_chain(const PreparedData& data, const RunConfig& config, int index) {
  RngStream rng(config.seed, static_cast<std::uint64_t>(index));
  const auto start = config.start[static_cast<std::size_t>(index) % config.start.size()];
  const Eigen::Index p = data.design.cols();
  const long long burn = config.resolved_burn_in();
  const long long kept = (config.iterations - burn) / config.thin;

  ChainResult res;
  res.chain = index;
  res.start = start;
  res.params.resize(kept, p + (config.model == ModelKind::nb ? 1 : 0));
  res.gamma.resize(kept, p);

  const GaussianPrior prior = GaussianPrior::isotropic(p, config.prior_variance);
  const SelectionConfig selection =
      SelectionConfig::uniform(static_cast<std::size_t>(p), config.inclusion_prior, config.selection);
  InclusionVector gamma = starting_flags(data.locked, start, rng);
  long long accepted = 0;
  long long proposed = 0;

  auto record = [&](long long row, const Eigen::VectorXd& beta, const InclusionVector& g) {
    res.params.row(row).head(p) = beta.transpose();
    for (Eigen::Index j = 0; j < p; ++j) res.gamma(row, j) = g.flags[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
  };

  if (config.model == ModelKind::nb) {
    NBData nb{{}, data.design.X};
    nb.y.reserve(data.y.size());
    for (double v : data.y) nb.y.push_back(static_cast<std::int64_t>(v));
    NBPriors priors{prior, config.xi_shape, config.xi_rate, config.fixed_xi};
    NBState state = nb_initial_state(nb, priors, gamma);
    long long row = 0;
    for (long long it = 1; it <= config.iterations; ++it) {
      const InclusionVector before = state.gamma;
      try {
        state = nb_gibbs_sweep(state, nb, priors, selection, rng);
      } catch (const NumericalError& e) {
        Json dump = state_json(state);
        dump["chain"] = index + 1;
        dump["sweep"] = it;
        throw ChainFailure("chain " + std::to_string(index + 1) + ", sweep " + std::to_string(it) + ": " + e.what(),
                           dump);
      }
      if (selection.enabled) {
        ++proposed;
        if (!(state.gamma == before)) ++accepted;
      }
      if (it > burn && (it - burn) % config.thin == 0 && row < kept) {
        record(row, state.beta, state.gamma);
        res.params(row, p) = state.xi;
        ++row;
      }
    }
  } else {
    BQRData bqr{{}, data.design.X};
    bqr.y.reserve(data.y.size());
    for (double v : data.y) bqr.y.push_back(static_cast<std::uint8_t>(v));
    const BQRConstants constants = bqr_constants(config.q);
    const BQRPriors priors{prior};
    BQRState state = bqr_initial_state(bqr, gamma);
    long long row = 0;
    for (long long it = 1; it <= config.iterations; ++it) {
      const InclusionVector before = state.gamma;
      try {
        state = bqr_gibbs_sweep(state, bqr, constants, priors, selection, rng);
      } catch (const NumericalError& e) {
        Json dump = state_json(state);
        dump["chain"] = index + 1;
        dump["sweep"] = it;
        throw ChainFailure("chain " + std::to_string(index + 1) + ", sweep " + std::to_string(it) + ": " + e.what(),
                           dump);
      }
      if (selection.enabled) {
        ++proposed;
        if (!(state.gamma == before)) ++accepted;
      }
      if (it > burn && (it - burn) % config.thin == 0 && row < kept) {
        record(row, state.beta, state.gamma);
        ++row;
      }
    }
  }
  res.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  return res;
}

/// Runs all chains, at most `threads` at a time. Results are indexed by
/// chain, so output is identical for any thread count.
inline std::vector<ChainResult> run_chains(const PreparedData& data, const RunConfig& config) {
  const int n = config.chains;
  int workers = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);
  std::vector<std::optional<ChainResult>> results(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        results[static_cast<std::size_t>(i)] = run_chain(data, config, i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<ChainResult> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------------------
// Output files

inline std::string chain_file_name(int index) { return "chain_" + std::to_string(index + 1) + ".csv"; }

/// One row per kept draw: parameter labels, then gamma.<label> flags.
inline void write_chain_csv(const std::string& path, const ChainResult& chain, const std::vector<std::string>& labels,
                            const std::vector<std::string>& column_labels) {
  CsvWriter w(path);
  std::vector<std::string> header = labels;
  for (const auto& l : column_labels) header.push_back("gamma." + l);
  w.row(header);
  for (Eigen::Index i = 0; i < chain.params.rows(); ++i) {
    std::vector<std::string> f;
    f.reserve(header.size());
    for (Eigen::Index j = 0; j < chain.params.cols(); ++j) f.push_back(format_number(chain.params(i, j)));
    for (Eigen::Index j = 0; j < chain.gamma.cols(); ++j) f.push_back(chain.gamma(i, j) > 0.5 ? "1" : "0");
    w.row(f);
  }
}

/// Draws file read back: parameters and inclusion flags as separate chains.
struct DrawsFile {
  Chain params;
  Chain gamma;  // labels without the gamma. prefix
};

inline DrawsFile read_draws_file(const std::string& path) {
  const CsvTable t = read_csv(path);
  DrawsFile out;
  std::vector<std::size_t> pcols, gcols;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].rfind("gamma.", 0) == 0) {
      gcols.push_back(j);
      out.gamma.labels.push_back(t.header[j].substr(6));
    } else {
      pcols.push_back(j);
      out.params.labels.push_back(t.header[j]);
    }
  }
  if (pcols.empty()) throw ValidationError(path + ": no parameter columns");
  const auto rows = static_cast<Eigen::Index>(t.rows.size());
  out.params.draws.resize(rows, static_cast<Eigen::Index>(pcols.size()));
  out.gamma.draws.resize(rows, static_cast<Eigen::Index>(gcols.size()));
  auto fill = [&](const std::vector<std::size_t>& cols, Eigen::MatrixXd& m) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto v = t.numeric(t.header[cols[c]]);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
          throw ValidationError(path + ": column '" + t.header[cols[c]] + "', row " + std::to_string(i + 1) +
                                ": non-finite draw");
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v[i];
      }
    }
  };
  fill(pcols, out.params.draws);
  fill(gcols, out.gamma.draws);
  return out;
}

inline Json design_json(const PreparedData& data, const RunConfig& config) {
  Json j;
  j["model"] = to_string(config.model);
  j["tau"] = config.tau;
  j["start_offset"] = config.start_offset;
  j["rows"] = data.design.rows();
  Json cols = Json::array();
  for (const auto& c : data.design.group_map) {
    Json e;
    e["label"] = c.label();
    e["covariate"] = c.covariate;
    e["kind"] = c.kind == ColumnKind::intercept ? "intercept"
                : c.kind == ColumnKind::static_covariate ? "static"
                                                         : "basis";
    e["basis_index"] = c.basis_index;
    cols.push_back(e);
  }
  j["columns"] = cols;
  Json bases = Json::array();
  for (const auto& b : data.bases) {
    Json e;
    e["covariate"] = b.name;
    e["degree"] = b.basis.degree;
    e["interior_knots"] = b.basis.interior_knots;
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < b.basis.entries.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(b.basis.entries.cols()));
      for (Eigen::Index k = 0; k < b.basis.entries.cols(); ++k) r[static_cast<std::size_t>(k)] = b.basis.entries(i, k);
      rows.push_back(r);
    }
    e["entries"] = rows;
    bases.push_back(e);
  }
  j["bases"] = bases;
  return j;
}

struct LagResponseRow {
  std::string covariate;
  std::size_t lag = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Pointwise posterior mean and equal-tailed interval of basis x beta_d over
/// the pooled draws, for every dynamic covariate in the design file.
inline std::vector<LagResponseRow> lag_response_summary(const Json& design, const std::vector<Chain>& chains,
                                                        double mass = 0.95) {
  std::vector<LagResponseRow> out;
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.iterations();
  if (total == 0) throw ValidationError("lag-response: no draws");
  try {
    for (const auto& b : design.at("bases")) {
      const std::string name = b.at("covariate").get<std::string>();
      const auto rows = b.at("entries").get<std::vector<std::vector<double>>>();
      BasisMatrix basis;
      basis.degree = b.at("degree").get<int>();
      basis.entries.resize(static_cast<Eigen::Index>(rows.size()),
                           rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k)
          basis.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      const Eigen::Index width = basis.entries.cols();
      // curves: lags x draws
      Eigen::MatrixXd curves(basis.entries.rows(), total);
      Eigen::Index col = 0;
      for (const auto& c : chains) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index k = 0; k < width; ++k) {
          const auto j = c.index_of(name + ".b" + std::to_string(k));
          if (j < 0) throw ValidationError("lag-response: draws lack column '" + name + ".b" + std::to_string(k) + "'");
          idx.push_back(j);
        }
        for (Eigen::Index i = 0; i < c.iterations(); ++i) {
          Eigen::VectorXd beta(width);
          for (Eigen::Index k = 0; k < width; ++k) beta(k) = c.draws(i, idx[static_cast<std::size_t>(k)]);
          curves.col(col++) = lag_response_curve(basis, beta);
        }
      }
      for (Eigen::Index lag = 0; lag < curves.rows(); ++lag) {
        std::vector<double> v(curves.row(lag).data(), curves.row(lag).data() + 0);
        v.resize(static_cast<std::size_t>(total));
        for (Eigen::Index d = 0; d < total; ++d) v[static_cast<std::size_t>(d)] = curves(lag, d);
        std::sort(v.begin(), v.end());
        LagResponseRow r;
        r.covariate = name;
        r.lag = static_cast<std::size_t>(lag);
        r.mean = curves.row(lag).mean();
        r.lower = sorted_quantile(v, 0.5 * (1.0 - mass));
        r.upper = sorted_quantile(v, 1.0 - 0.5 * (1.0 - mass));
        out.push_back(r);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("design file: ") + e.what());
  }
  return out;
}

inline void write_lag_response_csv(const std::string& path, const std::vector<LagResponseRow>& rows) {
  CsvWriter w(path);
  w.row({"lag", "mean", "lower", "upper", "covariate"});
  for (const auto& r : rows)
    w.row({std::to_string(r.lag), format_number(r.mean), format_number(r.lower), format_number(r.upper), r.covariate});
}

struct FitOutput {
  PreparedData data;
  std::vector<ChainResult> chains;
  std::vector<std::string> labels;
};

/// The whole `fit` command: prepare, run, and write every output file into
/// `out_dir`. A failing chain leaves a JSON state dump next to the outputs.
inline FitOutput run_fit(const std::string& dataset_path, const RunConfig& config, const std::string& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  {
    std::ofstream m(dir / "manifest.txt", std::ios::binary);
    m << "dataset = " << dataset_path << '\n';
    for (const auto& [k, v] : config.manifest()) m << k << " = " << v << '\n';
  }

  FitOutput out;
  out.data = prepare_data(read_csv(dataset_path), config);
  out.labels = parameter_labels(out.data, config.model);
  const auto column_labels = out.data.design.labels();
  const Json design = design_json(out.data, config);
  write_json((dir / "design.json").string(), design);

  try {
    out.chains = run_chains(out.data, config);
  } catch (const ChainFailure& f) {
    write_json((dir / "failure_state.json").string(), f.state());
    throw;
  }

  for (const auto& c : out.chains)
    write_chain_csv((dir / chain_file_name(c.chain)).string(), c, out.labels, column_labels);

  // pooled summaries
  Eigen::Index total = 0;
  for (const auto& c : out.chains) total += c.params.rows();
  Eigen::MatrixXd pooled(total, static_cast<Eigen::Index>(out.labels.size()));
  Eigen::MatrixXd pooled_gamma(total, static_cast<Eigen::Index>(column_labels.size()));
  Eigen::Index row = 0;
  for (const auto& c : out.chains) {
    pooled.middleRows(row, c.params.rows()) = c.params;
    pooled_gamma.middleRows(row, c.gamma.rows()) = c.gamma;
    row += c.params.rows();
  }
  if (total > 0) {
    const auto summary = posterior_summary(Chain{pooled, out.labels, static_cast<int>(config.thin)});
    const Eigen::VectorXd incl = inclusion_probabilities(pooled_gamma);
    CsvWriter s((dir / "summary.csv").string());
    s.row({"parameter", "mean", "sd", "q2.5", "median", "q97.5", "hpd_lower", "hpd_upper", "inefficiency",
           "inclusion"});
    Json js = Json::array();
    for (std::size_t j = 0; j < summary.size(); ++j) {
      const auto& r = summary[j];
      const double inc = j < column_labels.size() ? incl(static_cast<Eigen::Index>(j)) : 1.0;
      s.row({r.label, format_number(r.mean), format_number(r.sd), format_number(r.q025), format_number(r.median),
             format_number(r.q975), format_number(r.hpd95.lower), format_number(r.hpd95.upper),
             format_number(r.inefficiency), format_number(inc)});
      Json e;
      e["parameter"] = r.label;
      e["mean"] = r.mean;
      e["sd"] = r.sd;
      e["q2.5"] = r.q025;
      e["median"] = r.median;
      e["q97.5"] = r.q975;
      e["hpd_lower"] = r.hpd95.lower;
      e["hpd_upper"] = r.hpd95.upper;
      e["inefficiency"] = std::isfinite(r.inefficiency) ? Json(r.inefficiency) : Json(nullptr);
      e["inclusion"] = inc;
      js.push_back(e);
    }
    write_json((dir / "summary.json").string(), js);

    CsvWriter inc((dir / "inclusion.csv").string());
    std::vector<std::string> header{"parameter"};
    for (const auto& c : out.chains) header.push_back("chain_" + std::to_string(c.chain + 1));
    header.push_back("pooled");
    inc.row(header);
    std::vector<Eigen::VectorXd> per_chain;
    for (const auto& c : out.chains)
      per_chain.push_back(c.gamma.rows() ? inclusion_probabilities(c.gamma) : Eigen::VectorXd::Zero(c.gamma.cols()));
    for (std::size_t j = 0; j < column_labels.size(); ++j) {
      std::vector<std::string> f{column_labels[j]};
      for (const auto& v : per_chain) f.push_back(format_number(v(static_cast<Eigen::Index>(j))));
      f.push_back(format_number(incl(static_cast<Eigen::Index>(j))));
      inc.row(f);
    }

    if (!out.data.bases.empty()) {
      std::vector<Chain> chains;
      for (const auto& c : out.chains) chains.push_back(Chain{c.params, out.labels, static_cast<int>(config.thin)});
      write_lag_response_csv((dir / "lag_response.csv").string(), lag_response_summary(design, chains));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics report

struct ReportLine {
  std::string section;
  std::string chain;
  std::string parameter;
  std::string value;
  std::string note;
};

/// Inefficiency factors and inclusion frequencies per chain, plus Pearson
/// correlations for requested pairs (intercept with xi whenever both exist).
inline std::vector<ReportLine> diagnose(const std::vector<std::string>& files,
                                        std::vector<std::pair<std::string, std::string>> pairs = {}) {
  if (files.empty()) throw ValidationError("diagnose: at least one draws file is required");
  std::vector<DrawsFile> draws;
  for (const auto& f : files) draws.push_back(read_draws_file(f));
  const auto& first = draws.front().params;
  if (first.index_of("intercept") >= 0 && first.index_of("xi") >= 0) {
    const std::pair<std::string, std::string> ix{"intercept", "xi"};
    if (std::find(pairs.begin(), pairs.end(), ix) == pairs.end()) pairs.insert(pairs.begin(), ix);
  }

  std::vector<ReportLine> out;
  for (std::size_t c = 0; c < draws.size(); ++c) {
    const std::string id = std::filesystem::path(files[c]).filename().string();
    const auto& p = draws[c].params;
    for (Eigen::Index j = 0; j < p.parameters(); ++j) {
      const auto x = column(p.draws, j);
      if (x.size() < kMinIfLength) {
        out.push_back({"inefficiency", id, p.labels[static_cast<std::size_t>(j)], "NA",
                       "unavailable: " + std::to_string(x.size()) + " draws < " + std::to_string(kMinIfLength)});
      } else {
        const double f = inefficiency_factor(x);
        out.push_back({"inefficiency", id, p.labels[static_cast<std::size_t>(j)], format_number(f),
                       std::isnan(f) ? "constant chain" : ""});
      }
    }
  }
  for (std::size_t c = 0; c < draws.size(); ++c) {
    const std::string id = std::filesystem::path(files[c]).filename().string();
    const auto& g = draws[c].gamma;
    if (g.parameters() == 0 || g.iterations() == 0) continue;
    const Eigen::VectorXd incl = inclusion_probabilities(g.draws);
    for (Eigen::Index j = 0; j < g.parameters(); ++j)
      out.push_back({"inclusion", id, g.labels[static_cast<std::size_t>(j)], format_number(incl(j)), ""});
  }
  for (const auto& [a, b] : pairs) {
    for (std::size_t c = 0; c < draws.size(); ++c) {
      const std::string id = std::filesystem::path(files[c]).filename().string();
      const auto& p = draws[c].params;
      const auto ia = p.index_of(a);
      const auto ib = p.index_of(b);
      if (ia < 0 || ib < 0) throw ValidationError("diagnose: " + id + " lacks column '" + (ia < 0 ? a : b) + "'");
      if (p.iterations() < 2) {
        out.push_back({"correlation", id, a + ":" + b, "NA", "unavailable: fewer than 2 draws"});
        continue;
      }
      out.push_back({"correlation", id, a + ":" + b, format_number(pearson(column(p.draws, ia), column(p.draws, ib))), ""});
    }
  }
  return out;
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportLine>& lines) {
  os << "section,chain,parameter,value,note\n";
  for (const auto& l : lines) os << l.section << ',' << l.chain << ',' << l.parameter << ',' << l.value << ',' << l.note << '\n';
}

}  // namespace latentdlm
