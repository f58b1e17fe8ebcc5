// Command-line front end: simulate presets, run diagnostic batteries on
// user-supplied CSV data, and execute Monte Carlo experiment configs.
//
// Exit codes: 0 clean, 1 configuration/usage error, 2 fit failure or
// flagged discard rate, 3 at least one requested test rejected.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "portes/dgp.hpp"
#include "portes/estimation.hpp"
#include "portes/montecarlo.hpp"
#include "portes/portmanteau.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 20260824;

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_given) {
  if (seed_given) return flag_seed;
  if (const char* env = std::getenv("PORTES_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("PORTES_SEED", "not a valid integer seed");
    }
  }
  return kDefaultSeed;
}

bool numeric_token(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

// single-column or date,value CSV; a leading non-numeric row is treated as
// a header
portes::TimeSeries read_csv(const std::string& path,
                            const std::string& format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  portes::TimeSeries ts;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string date, value = line;
    const auto comma = line.find(',');
    const bool two_cols =
        format == "date-value" || (format == "auto" && comma != std::string::npos);
    if (two_cols) {
      if (comma == std::string::npos)
        throw std::runtime_error("expected date,value row: " + line);
      date = line.substr(0, comma);
      value = line.substr(comma + 1);
    }
    if (first && !numeric_token(value)) {
      first = false;
      continue;  // header row
    }
    first = false;
    if (!numeric_token(value))
      throw std::runtime_error("non-numeric value in data file: " + value);
    ts.values.push_back(std::strtod(value.c_str(), nullptr));
    if (two_cols) ts.timestamps.push_back(date);
  }
  return ts;
}

portes::TimeSeries log_returns(const portes::TimeSeries& prices) {
  portes::TimeSeries out;
  for (std::size_t t = 1; t < prices.size(); ++t) {
    if (!(prices.values[t] > 0.0) || !(prices.values[t - 1] > 0.0))
      throw std::runtime_error("log-returns need strictly positive prices");
    out.values.push_back(std::log(prices.values[t]) -
                         std::log(prices.values[t - 1]));
    if (!prices.timestamps.empty())
      out.timestamps.push_back(prices.timestamps[t]);
  }
  return out;
}

std::vector<portes::TestId> parse_tests(const std::vector<std::string>& names) {
  std::vector<portes::TestId> out;
  for (const auto& n : names) out.push_back(portes::test_id_from_string(n));
  return out;
}

int cmd_simulate(const std::string& preset_name, const std::string& spec_path,
                 bool has_param, double param, std::size_t n,
                 std::uint64_t seed, bool seed_given,
                 const std::string& out_path) {
  portes::DgpSpec spec;
  if (preset_name.empty() && spec_path.empty()) {
    std::cerr << "error: simulate needs --preset or --spec\nknown presets:";
    for (const auto& name : portes::preset_names()) std::cerr << ' ' << name;
    std::cerr << '\n';
    return 1;
  }
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) {
      std::cerr << "error: cannot open spec file: " << spec_path << '\n';
      return 1;
    }
    nlohmann::json j;
    try {
      in >> j;
      spec = portes::dgp_from_json(j);
    } catch (const std::exception& e) {
      std::cerr << "error: malformed spec file: " << e.what() << '\n';
      return 1;
    }
  } else {
    try {
      spec = portes::preset(preset_name,
                            has_param ? std::optional<double>(param)
                                      : std::nullopt);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\nknown presets:";
      for (const auto& name : portes::preset_names()) std::cerr << ' ' << name;
      std::cerr << '\n';
      return 1;
    }
  }

  portes::RngStream stream(resolve_seed(seed, seed_given), 0);
  portes::TimeSeries ts;
  try {
    ts = portes::simulate(spec, n, n / 2, stream);
  } catch (const std::exception& e) {
    std::cerr << "error: simulation failed: " << e.what() << '\n';
    return 1;
  }

  // build the full payload before touching the file so a failure leaves
  // no partial output
  std::ostringstream body;
  body << "value\n";
  char buf[64];
  for (double v : ts.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    body << buf << '\n';
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out || !(out << body.str()) || !out.flush()) {
    std::cerr << "error: cannot write " << out_path << '\n';
    return 1;
  }
  std::cout << portes::to_json(spec).dump(2) << '\n';
  return 0;
}

int cmd_diagnose(const std::string& data_path, const std::string& format,
                 bool use_log_returns, const std::string& model,
                 const std::vector<int>& lags,
                 const std::vector<std::string>& test_names, double alpha,
                 const std::string& out_path) {
  portes::TimeSeries ts;
  try {
    ts = read_csv(data_path, format);
    if (use_log_returns) ts = log_returns(ts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  for (double v : ts.values)
    if (!std::isfinite(v)) {
      std::cerr << "error: data contains non-finite values\n";
      return 1;
    }
  if (ts.size() < 30) {
    std::cerr << "error: need at least 30 observations, got " << ts.size()
              << '\n';
    return 1;
  }

  portes::ModelSpec spec;
  try {
    if (model == "ar-bic") {
      spec = portes::ModelSpec{portes::select_order_bic(ts), 0, true, 0, 0};
    } else {
      spec = portes::model_spec_from_string(model);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  const int max_lag = *std::max_element(lags.begin(), lags.end());
  if (ts.size() <= static_cast<std::size_t>(max_lag + spec.n_params())) {
    std::cerr << "error: series too short for the requested lags and model\n";
    return 1;
  }

  portes::FittedModel fit;
  try {
    fit = portes::fit_qmle(spec, ts);
  } catch (const std::exception& e) {
    std::cerr << "error: fit failed: " << e.what() << '\n';
    return 2;
  }
  if (!fit.converged) {
    std::cerr << "error: fit did not converge for " << spec.to_string()
              << " (loglik " << fit.loglik << ", " << fit.iterations
              << " iterations)\n";
    return 2;
  }

  std::vector<portes::TestId> tests;
  try {
    tests = parse_tests(test_names);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  const auto results = portes::run_battery(fit, lags, tests);
  std::cout << "model: " << spec.to_string() << "   n=" << ts.size()
            << "   loglik=" << fit.loglik << '\n';
  std::cout << portes::format_table(results);

  if (!out_path.empty()) {
    nlohmann::json j = {{"model", portes::to_json(fit)},
                        {"tests", portes::to_json(results)}};
    std::ofstream out(out_path, std::ios::trunc);
    if (!out || !(out << j.dump(2) << '\n')) {
      std::cerr << "error: cannot write " << out_path << '\n';
      return 1;
    }
  }

  for (const auto& r : results)
    if (r.p_value < alpha) return 3;
  return 0;
}

int cmd_experiment(const std::string& config_path, int workers,
                   const std::string& out_dir, std::uint64_t seed,
                   bool seed_given) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config: " << config_path << '\n';
    return 1;
  }
  portes::ExperimentConfig cfg;
  try {
    nlohmann::json j;
    in >> j;
    cfg = portes::config_from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return 1;
  }
  if (seed_given || std::getenv("PORTES_SEED"))
    cfg.master_seed = resolve_seed(seed, seed_given);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << out_dir << ": "
              << ec.message() << '\n';
    return 1;
  }

  portes::ExperimentReport report;
  try {
    report = portes::run_experiment(cfg, workers);
  } catch (const std::exception& e) {
    std::cerr << "error: experiment failed: " << e.what() << '\n';
    return 2;
  }

  const auto write_file = [&](const std::string& name,
                              const std::string& text) {
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text) || !out.flush())
      throw std::runtime_error("cannot write " + path);
    std::cerr << "wrote " << path << '\n';
  };
  try {
    std::ostringstream csv;
    portes::write_report_csv(report, csv);
    write_file("report.csv", csv.str());
    write_file("report.json",
               portes::report_to_json(report, cfg).dump(2) + "\n");
    if (!report.raw_samples.empty()) {
      std::ostringstream samples;
      portes::write_samples_csv(report, samples);
      write_file("samples.csv", samples.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  if (report.discard_flagged) {
    std::cerr << "warning: discard rate exceeded 5% (total discards "
              << report.total_discards << ")\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"portes: mixed portmanteau diagnostics for time series"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate data from a DGP");
  std::string sim_preset, sim_spec, sim_out = "simulated.csv";
  double sim_param = 0.0;
  std::size_t sim_n = 500;
  std::uint64_t sim_seed = kDefaultSeed;
  auto* preset_opt = sim->add_option("--preset", sim_preset, "preset name");
  auto* spec_opt = sim->add_option("--spec", sim_spec, "spec JSON file")
                       ->excludes(preset_opt);
  preset_opt->excludes(spec_opt);
  auto* param_opt =
      sim->add_option("--param", sim_param, "swept preset coefficient");
  sim->add_option("-n,--length", sim_n, "series length")->default_val(500);
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--out", sim_out, "output CSV path")->required();

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "fit a null model and test it");
  std::string diag_data, diag_format = "auto", diag_model = "ar-bic",
              diag_out;
  bool diag_logret = false;
  std::vector<int> diag_lags = {5, 10, 15, 20, 25};
  std::vector<std::string> diag_tests = {"C12", "C21", "Q12", "Q21", "Q22"};
  double diag_alpha = 0.05;
  diag->add_option("--data", diag_data, "input CSV path")->required();
  diag->add_option("--format", diag_format, "csv layout")
      ->check(CLI::IsMember({"auto", "single", "date-value"}));
  diag->add_flag("--log-returns", diag_logret,
                 "difference the natural logs before fitting");
  diag->add_option("--model", diag_model,
                   "null model, e.g. c+arma(1,1)+garch(1,1), or ar-bic");
  diag->add_option("--lags", diag_lags, "test lags m")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  diag->add_option("--tests", diag_tests, "tests to run")->delimiter(',');
  diag->add_option("--alpha", diag_alpha, "rejection level")
      ->check(CLI::Range(1e-6, 1.0));
  diag->add_option("--out", diag_out, "JSON report path");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a Monte Carlo study");
  std::string exp_config, exp_out = ".";
  int exp_workers = 1;
  std::uint64_t exp_seed = kDefaultSeed;
  exp->add_option("config", exp_config, "experiment config JSON")->required();
  exp->add_option("--workers", exp_workers, "worker thread count")
      ->check(CLI::PositiveNumber);
  exp->add_option("--out", exp_out, "output directory");
  auto* exp_seed_opt = exp->add_option("--seed", exp_seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // collapse CLI11's assorted error codes onto the documented usage code
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_preset, sim_spec, param_opt->count() > 0,
                          sim_param, sim_n, sim_seed,
                          sim_seed_opt->count() > 0, sim_out);
    if (diag->parsed())
      return cmd_diagnose(diag_data, diag_format, diag_logret, diag_model,
                          diag_lags, diag_tests, diag_alpha, diag_out);
    if (exp->parsed())
      return cmd_experiment(exp_config, exp_workers, exp_out, exp_seed,
                            exp_seed_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
