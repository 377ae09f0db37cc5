// latentdlm: simulate | fit | diagnose | lag-response

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latentdlm/error.hpp"
#include "latentdlm/io.hpp"
#include "latentdlm/runner.hpp"
#include "latentdlm/simulation.hpp"

namespace {

using namespace latentdlm;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::vector<double> parse_effects(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split(text, ',')) {
    const std::string t = trim(f);
    if (t.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
      throw ValidationError(what + ": expected comma-separated numbers, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

int run_simulate(const std::string& kind, std::size_t n, std::size_t tau, std::uint64_t seed,
                 const std::optional<double>& intercept, double xi, double q, const std::string& statics,
                 const std::string& dynamics, const std::string& out_path, const std::string& truth_path) {
  SimConfig config;
  config.kind = parse_response_kind(kind);
  config.n = n;
  config.tau = tau;
  config.seed = seed;
  config.intercept = intercept;
  config.xi = xi;
  config.q = q;
  if (!statics.empty()) config.static_effects = parse_effects(statics, "--static-effects");
  if (!dynamics.empty()) config.dynamic_effects = parse_effects(dynamics, "--dynamic-effects");
  RngStream rng(seed, 0);
  const SimDataset data = simulate_dataset(config, rng);
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_dataset_csv(out_path, data);
  write_json(truth_path, to_json(data.truth));
  std::cout << "wrote " << out_path << " (" << data.y.size() << " responses, " << data.y.size() + tau
            << " rows) and " << truth_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-variable distributed lag models with Bayesian variable selection"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a dataset with a known truth record");
  std::string sim_kind = "count";
  std::size_t sim_n = 5114;
  std::size_t sim_tau = 40;
  std::uint64_t sim_seed = 1;
  std::optional<double> sim_intercept;
  double sim_xi = 50.0;
  double sim_q = 0.9;
  std::string sim_statics;
  std::string sim_dynamics;
  std::string sim_out = "dataset.csv";
  std::string sim_truth;
  sim->add_option("--kind", sim_kind, "count (negative binomial) or binary (quantile)")->capture_default_str();
  sim->add_option("--n", sim_n, "Number of response rows")->capture_default_str();
  sim->add_option("--tau", sim_tau, "Maximum lag")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  sim->add_option("--intercept", sim_intercept, "Intercept (default -1 for count, 0 for binary)");
  sim->add_option("--xi", sim_xi, "Negative binomial dispersion")->capture_default_str();
  sim->add_option("--q", sim_q, "Quantile level for binary responses")->capture_default_str();
  sim->add_option("--static-effects", sim_statics, "Comma-separated static effects");
  sim->add_option("--dynamic-effects", sim_dynamics, "Comma-separated effects for rhum,pm10,o3");
  sim->add_option("--out", sim_out, "Dataset CSV path")->capture_default_str();
  sim->add_option("--truth", sim_truth, "Truth JSON path (default: <out>.truth.json)");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model with multiple chains");
  std::string fit_data;
  std::string fit_config;
  std::string fit_out = "fit_out";
  std::vector<std::string> fit_set;
  std::map<std::string, std::string> flag_values;
  fit->add_option("dataset", fit_data, "Dataset CSV")->required();
  fit->add_option("--config", fit_config, "key = value config file");
  fit->add_option("--out", fit_out, "Output directory")->capture_default_str();
  fit->add_option("--set", fit_set, "Override any config key: key=value (repeatable)");
  const std::vector<std::pair<std::string, std::string>> fit_flags{
      {"model", "nb or bqr"},
      {"iterations", "Total sweeps per chain"},
      {"burn_in", "Discarded sweeps (default iterations/2)"},
      {"thin", "Keep every k-th sweep"},
      {"chains", "Number of chains"},
      {"start", "Start strategies, e.g. intercept,full,random,random"},
      {"prior_variance", "Coefficient prior variance"},
      {"inclusion_prior", "Prior inclusion probability"},
      {"xi_shape", "Gamma prior shape for xi"},
      {"xi_rate", "Gamma prior rate for xi"},
      {"fixed_xi", "Hold xi fixed at this value"},
      {"q", "Quantile level"},
      {"tau", "Maximum lag"},
      {"start_offset", "Rows skipped between history and the last response"},
      {"knots", "Interior knots"},
      {"degree", "Spline degree"},
      {"seed", "Random seed"},
      {"imputation", "none, mean or ffill"},
      {"dichotomize", "Binary response I(y > threshold)"},
      {"response", "Response column"},
      {"statics", "Comma-separated static columns (default static_*)"},
      {"dynamics", "Comma-separated dynamic columns (default dyn_*)"},
      {"lock", "Covariates always included"},
      {"selection", "Enable variable selection (true/false)"},
      {"center_dynamics", "Center dynamic series before lagging"},
      {"threads", "Worker threads (0: hardware)"},
      {"preset", "simulation or real-data run lengths"},
  };
  for (const auto& [key, help] : fit_flags) {
    std::string flag = "--" + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    fit->add_option_function<std::string>(
        flag, [&flag_values, key = key](const std::string& v) { flag_values[key] = v; }, help);
  }

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Inefficiency factors, inclusion frequencies and correlations");
  std::vector<std::string> diag_files;
  std::vector<std::string> diag_pairs;
  std::string diag_out;
  diag->add_option("draws", diag_files, "Chain draws CSV files")->required();
  diag->add_option("--pair", diag_pairs, "Extra correlation pair a:b (repeatable)");
  diag->add_option("--out", diag_out, "Report CSV path (default stdout)");

  // lag-response
  auto* lag = app.add_subcommand("lag-response", "Posterior lag-response curves from a fit directory");
  std::string lag_dir;
  std::string lag_out;
  double lag_mass = 0.95;
  lag->add_option("fit_dir", lag_dir, "Directory written by fit")->required();
  lag->add_option("--out", lag_out, "Output CSV (default stdout)");
  lag->add_option("--mass", lag_mass, "Interval mass")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) {
      const std::string truth = sim_truth.empty() ? sim_out + ".truth.json" : sim_truth;
      return run_simulate(sim_kind, sim_n, sim_tau, sim_seed, sim_intercept, sim_xi, sim_q, sim_statics,
                          sim_dynamics, sim_out, truth);
    }
    if (*fit) {
      RunConfig config;
      if (!fit_config.empty()) load_config_file(fit_config, config);
      // preset first so explicit flags win over it
      if (auto it = flag_values.find("preset"); it != flag_values.end()) config.set("preset", it->second);
      for (const auto& [k, v] : flag_values)
        if (k != "preset") config.set(k, v);
      for (const auto& kv : fit_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        config.set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
      }
      try {
        const auto out = run_fit(fit_data, config, fit_out);
        std::cout << "fit complete: " << out.chains.size() << " chains, "
                  << (out.chains.empty() ? 0 : out.chains.front().params.rows()) << " draws each -> " << fit_out
                  << '\n';
      } catch (const ChainFailure& f) {
        std::cerr << "numerical failure: " << f.what() << "\nstate dump: "
                  << (std::filesystem::path(fit_out) / "failure_state.json").string() << '\n';
        return kExitNumerical;
      }
      return 0;
    }
    if (*diag) {
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& p : diag_pairs) {
        const auto c = p.find(':');
        if (c == std::string::npos) throw ValidationError("--pair expects a:b, got '" + p + "'");
        pairs.emplace_back(p.substr(0, c), p.substr(c + 1));
      }
      const auto report = diagnose(diag_files, pairs);
      if (diag_out.empty()) {
        write_report_csv(std::cout, report);
      } else {
        std::ofstream os(diag_out, std::ios::binary);
        if (!os) throw ValidationError("cannot write '" + diag_out + "'");
        write_report_csv(os, report);
      }
      return 0;
    }
    if (*lag) {
      namespace fs = std::filesystem;
      const Json design = read_json((fs::path(lag_dir) / "design.json").string());
      std::vector<Chain> chains;
      for (int k = 0;; ++k) {
        const fs::path p = fs::path(lag_dir) / chain_file_name(k);
        if (!fs::exists(p)) break;
        chains.push_back(read_draws_file(p.string()).params);
      }
      if (chains.empty()) throw ValidationError(lag_dir + ": no chain_*.csv files");
      if (!(lag_mass > 0.0 && lag_mass < 1.0)) throw ValidationError("--mass must lie in (0, 1)");
      const auto rows = lag_response_summary(design, chains, lag_mass);
      if (lag_out.empty()) {
        std::cout << "lag,mean,lower,upper,covariate\n";
        for (const auto& r : rows)
          std::cout << r.lag << ',' << format_number(r.mean) << ',' << format_number(r.lower) << ','
                    << format_number(r.upper) << ',' << r.covariate << '\n';
      } else {
        write_lag_response_csv(lag_out, rows);
      }
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
