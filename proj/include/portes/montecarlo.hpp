#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "portes/dgp.hpp"
#include "portes/estimation.hpp"
#include "portes/portmanteau.hpp"

namespace portes {

enum class ExperimentKind { Size, Power, Contamination, NullDistribution };

struct NamedDgp {
  std::string name;  // preset name or "custom"
  DgpSpec spec;
};

struct FitTarget {
  bool ar_bic = false;
  ModelSpec spec;  // ignored when ar_bic
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Size;
  NamedDgp dgp;  // size / power / null-distribution
  FitTarget fit;
  std::vector<std::size_t> n_list;
  std::vector<int> m_list;     // empty + sqrt rule -> m = floor(sqrt(n))
  bool m_sqrt_rule = false;
  int replications = 1000;
  double alpha = 0.05;
  std::vector<TestId> tests;
  std::vector<double> grid;          // power sweep of the dgp parameter
  std::vector<double> omega_sq_grid; // contamination noise-to-signal grid
  std::vector<NamedDgp> linear_dgps, nonlinear_dgps;  // contamination
  std::uint64_t master_seed = 20260824;
  SigmaScaling scaling;
  int max_attempts = 50;  // redraws allowed per replication
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct CellResult {
  std::string dgp;
  std::string group;  // contamination: "linear" / "nonlinear"
  std::string test;   // test id, or the power aggregates "Cstar" / "Qstar"
  std::size_t n = 0;
  int m = 0;
  bool has_grid = false;
  double grid_value = 0.0;
  bool has_omega_sq = false;
  double omega_sq = 0.0;
  double frequency = 0.0;
  double se = 0.0;  // binomial standard error sqrt(f(1-f)/R)
  int replications = 0;
  int discards = 0;
};

struct NullSummary {
  int m = 0;
  std::string test;
  int df = 0;
  double mean = 0.0;
  double variance = 0.0;
  double ks = 0.0;  // Kolmogorov-Smirnov distance to chi-squared(df)
};

struct RawSample {
  int m = 0;
  std::string test;
  int replication = 0;
  double value = 0.0;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::Size;
  std::vector<CellResult> cells;
  std::vector<NullSummary> null_summaries;   // null-distribution runs
  std::vector<RawSample> raw_samples;        // null-distribution runs
  int total_discards = 0;
  bool discard_flagged = false;  // discard rate exceeded 5% somewhere
};

ExperimentReport run_size(const ExperimentConfig& config, int workers = 1);
ExperimentReport run_power(const ExperimentConfig& config, int workers = 1);
ExperimentReport run_contamination(const ExperimentConfig& config,
                                   int workers = 1);
ExperimentReport sample_null_distribution(const ExperimentConfig& config,
                                          int workers = 1);

/// Dispatches on config.kind.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                int workers = 1);

/// Kolmogorov-Smirnov distance of a sample to the chi-squared(df) law.
double ks_distance_chi2(std::vector<double> sample, int df);

/// One row per cell; byte-stable for fixed inputs.
void write_report_csv(const ExperimentReport& report, std::ostream& os);
void write_samples_csv(const ExperimentReport& report, std::ostream& os);
nlohmann::json report_to_json(const ExperimentReport& report,
                              const ExperimentConfig& config);

}  // namespace portes
