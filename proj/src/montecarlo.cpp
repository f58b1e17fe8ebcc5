#include "portes/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace portes {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t dgp_key(const NamedDgp& dgp) {
  if (dgp.name != "custom" && !dgp.name.empty()) return fnv1a(dgp.name);
  return fnv1a(to_json(dgp.spec).dump());
}

// index-keyed task loop; results are written by replication index so the
// aggregate cannot depend on worker count or scheduling
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int k = std::min<int>(workers, static_cast<int>(count));
  pool.reserve(k);
  for (int w = 0; w < k; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

ModelSpec resolve_fit_spec(const FitTarget& fit, const TimeSeries& ts) {
  if (!fit.ar_bic) return fit.spec;
  return ModelSpec{select_order_bic(ts), 0, true, 0, 0};
}

bool rejects(const TestResult& r, double alpha) {
  return alpha >= 1.0 || r.p_value < alpha;
}

std::vector<int> resolve_m_list(const ExperimentConfig& cfg, std::size_t n) {
  if (cfg.m_sqrt_rule || cfg.m_list.empty())
    return {static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))))};
  return cfg.m_list;
}

struct RepOutcome {
  std::vector<TestResult> results;
  int discards = 0;
  bool ok = false;
};

// one replication: simulate (optionally contaminate), fit, run the battery;
// non-convergent fits are redrawn on a fresh attempt sub-stream
RepOutcome run_replication(const ExperimentConfig& cfg, const NamedDgp& dgp,
                           std::uint64_t cell_key, std::size_t n,
                           std::size_t rep, const std::vector<int>& m_list,
                           const std::vector<TestId>& tests,
                           std::optional<double> omega_sq) {
  RepOutcome out;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    try {
      RngStream sim_stream(cfg.master_seed,
                           mix_stream_id(cell_key, rep, attempt, 1));
      TimeSeries ts = simulate(dgp.spec, n, n / 2, sim_stream);
      if (omega_sq) {
        // the noise stream is keyed independently of omega_sq so every
        // grid point reuses the same base series and the same eta draws
        RngStream noise(cfg.master_seed,
                        mix_stream_id(cell_key, rep, attempt, 2));
        ts = contaminate(ts, *omega_sq, noise);
      }
      const ModelSpec spec = resolve_fit_spec(cfg.fit, ts);
      const FittedModel fit = fit_qmle(spec, ts);
      if (!fit.converged) {
        ++out.discards;
        continue;
      }
      out.results = run_battery(fit, m_list, tests, cfg.scaling);
      out.ok = true;
      return out;
    } catch (const std::exception&) {
      ++out.discards;
    }
  }
  return out;
}

struct BatchCounts {
  // (m, test) -> rejection count
  std::map<std::pair<int, TestId>, int> rejections;
  int retained = 0;
  int discards = 0;
};

BatchCounts run_batch(const ExperimentConfig& cfg, const NamedDgp& dgp,
                      std::uint64_t cell_key, std::size_t n,
                      const std::vector<int>& m_list,
                      const std::vector<TestId>& tests, int workers,
                      std::optional<double> omega_sq = {}) {
  std::vector<RepOutcome> outcomes(cfg.replications);
  parallel_for(cfg.replications, workers, [&](std::size_t rep) {
    outcomes[rep] = run_replication(cfg, dgp, cell_key, n, rep, m_list, tests,
                                    omega_sq);
  });

  BatchCounts counts;
  for (const auto& o : outcomes) {
    counts.discards += o.discards;
    if (!o.ok) continue;
    ++counts.retained;
    for (const auto& r : o.results)
      if (rejects(r, cfg.alpha)) ++counts.rejections[{r.m, r.id}];
  }
  return counts;
}

CellResult make_cell(const std::string& dgp, const std::string& test,
                     std::size_t n, int m, int hits, int retained,
                     int discards) {
  CellResult c;
  c.dgp = dgp;
  c.test = test;
  c.n = n;
  c.m = m;
  c.replications = retained;
  c.discards = discards;
  c.frequency = retained > 0 ? static_cast<double>(hits) / retained : 0.0;
  c.se = retained > 0
             ? std::sqrt(c.frequency * (1.0 - c.frequency) / retained)
             : 0.0;
  return c;
}

void note_discards(ExperimentReport& report, const ExperimentConfig& cfg,
                   int discards) {
  report.total_discards += discards;
  if (discards > 0.05 * cfg.replications) report.discard_flagged = true;
}

NamedDgp apply_grid(const NamedDgp& base, double value) {
  NamedDgp out;
  out.name = base.name;
  DgpSpec swept = preset(base.name, value);  // throws if not sweepable
  swept.innovation = base.spec.innovation;
  out.spec = swept;
  return out;
}

}  // namespace

double ks_distance_chi2(std::vector<double> sample, int df) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = chi_square_cdf(std::max(sample[i], 0.0), df);
    d = std::max(d, std::fabs((i + 1) / n - f));
    d = std::max(d, std::fabs(i / n - f));
  }
  return d;
}

ExperimentReport run_size(const ExperimentConfig& cfg, int workers) {
  ExperimentReport report;
  report.kind = ExperimentKind::Size;
  for (std::size_t n : cfg.n_list) {
    const auto m_list = resolve_m_list(cfg, n);
    const std::uint64_t key = mix_stream_id(dgp_key(cfg.dgp), n);
    const BatchCounts counts =
        run_batch(cfg, cfg.dgp, key, n, m_list, cfg.tests, workers);
    note_discards(report, cfg, counts.discards);
    for (int m : m_list)
      for (TestId id : cfg.tests) {
        auto it = counts.rejections.find({m, id});
        const int hits = it == counts.rejections.end() ? 0 : it->second;
        report.cells.push_back(make_cell(cfg.dgp.name, to_string(id), n, m,
                                         hits, counts.retained,
                                         counts.discards));
      }
    std::cerr << "size: dgp=" << cfg.dgp.name << " n=" << n
              << " retained=" << counts.retained
              << " discards=" << counts.discards << '\n';
  }
  return report;
}

ExperimentReport run_power(const ExperimentConfig& cfg, int workers) {
  ExperimentReport report;
  report.kind = ExperimentKind::Power;
  const std::vector<double> grid =
      cfg.grid.empty() ? std::vector<double>{0.0} : cfg.grid;
  for (std::size_t n : cfg.n_list) {
    const auto m_list = resolve_m_list(cfg, n);
    // the stream key excludes the grid value: every grid point reuses the
    // same base innovation draws, keeping power curves smooth
    const std::uint64_t key = mix_stream_id(dgp_key(cfg.dgp), n);
    for (double g : grid) {
      const NamedDgp dgp = cfg.grid.empty() ? cfg.dgp : apply_grid(cfg.dgp, g);
      const BatchCounts counts =
          run_batch(cfg, dgp, key, n, m_list, cfg.tests, workers);
      note_discards(report, cfg, counts.discards);
      for (int m : m_list) {
        double c12 = -1.0, c21 = -1.0, q12 = -1.0, q21 = -1.0;
        for (TestId id : cfg.tests) {
          auto it = counts.rejections.find({m, id});
          const int hits = it == counts.rejections.end() ? 0 : it->second;
          CellResult cell = make_cell(dgp.name, to_string(id), n, m, hits,
                                      counts.retained, counts.discards);
          cell.has_grid = true;
          cell.grid_value = g;
          if (id == TestId::C12) c12 = cell.frequency;
          if (id == TestId::C21) c21 = cell.frequency;
          if (id == TestId::Q12) q12 = cell.frequency;
          if (id == TestId::Q21) q21 = cell.frequency;
          report.cells.push_back(cell);
        }
        const auto aggregate = [&](const std::string& name, double f1,
                                   double f2) {
          if (f1 < 0.0 || f2 < 0.0) return;
          CellResult cell;
          cell.dgp = dgp.name;
          cell.test = name;
          cell.n = n;
          cell.m = m;
          cell.has_grid = true;
          cell.grid_value = g;
          cell.frequency = std::max(f1, f2);
          cell.se = std::sqrt(cell.frequency * (1.0 - cell.frequency) /
                              std::max(counts.retained, 1));
          cell.replications = counts.retained;
          cell.discards = counts.discards;
          report.cells.push_back(cell);
        };
        aggregate("Cstar", c12, c21);
        aggregate("Qstar", q12, q21);
      }
      std::cerr << "power: dgp=" << dgp.name << " n=" << n << " grid=" << g
                << " retained=" << counts.retained
                << " discards=" << counts.discards << '\n';
    }
  }
  return report;
}

ExperimentReport run_contamination(const ExperimentConfig& cfg, int workers) {
  if (cfg.linear_dgps.empty())
    throw std::invalid_argument(
        "contamination experiment needs a nonempty linear DGP list");
  ExperimentReport report;
  report.kind = ExperimentKind::Contamination;
  const std::vector<double> grid =
      cfg.omega_sq_grid.empty() ? std::vector<double>{0.0} : cfg.omega_sq_grid;

  const auto run_group = [&](const std::vector<NamedDgp>& dgps,
                             const std::string& group) {
    for (std::size_t n : cfg.n_list) {
      const auto m_list = resolve_m_list(cfg, n);
      for (double w : grid) {
        // pooled counts across the model list
        std::map<std::pair<int, TestId>, int> rejections;
        int retained = 0, discards = 0;
        for (const NamedDgp& dgp : dgps) {
          const std::uint64_t key = mix_stream_id(dgp_key(dgp), n);
          const BatchCounts counts =
              run_batch(cfg, dgp, key, n, m_list, cfg.tests, workers, w);
          retained += counts.retained;
          discards += counts.discards;
          for (const auto& [mk, hits] : counts.rejections)
            rejections[mk] += hits;
        }
        if (discards >
            0.05 * cfg.replications * static_cast<double>(dgps.size()))
          report.discard_flagged = true;
        report.total_discards += discards;
        for (int m : m_list)
          for (TestId id : cfg.tests) {
            auto it = rejections.find({m, id});
            const int hits = it == rejections.end() ? 0 : it->second;
            CellResult cell = make_cell(group + "-average", to_string(id), n,
                                        m, hits, retained, discards);
            cell.group = group;
            cell.has_omega_sq = true;
            cell.omega_sq = w;
            report.cells.push_back(cell);
          }
        std::cerr << "contamination: group=" << group << " n=" << n
                  << " omega_sq=" << w << " retained=" << retained
                  << " discards=" << discards << '\n';
      }
    }
  };

  run_group(cfg.linear_dgps, "linear");
  if (!cfg.nonlinear_dgps.empty()) run_group(cfg.nonlinear_dgps, "nonlinear");
  return report;
}

ExperimentReport sample_null_distribution(const ExperimentConfig& cfg,
                                          int workers) {
  ExperimentReport report;
  report.kind = ExperimentKind::NullDistribution;
  const std::vector<TestId> tests = {TestId::Cdot12, TestId::Cdot21,
                                     TestId::C12, TestId::C21};
  for (std::size_t n : cfg.n_list) {
    const auto m_list = resolve_m_list(cfg, n);
    const std::uint64_t key = mix_stream_id(dgp_key(cfg.dgp), n, 7);

    std::vector<RepOutcome> outcomes(cfg.replications);
    parallel_for(cfg.replications, workers, [&](std::size_t rep) {
      outcomes[rep] = run_replication(cfg, cfg.dgp, key, n, rep, m_list,
                                      tests, {});
    });

    std::map<std::pair<int, TestId>, std::vector<double>> samples;
    int discards = 0;
    int rep_index = 0;
    for (const auto& o : outcomes) {
      discards += o.discards;
      if (o.ok) {
        for (const auto& r : o.results) {
          samples[{r.m, r.id}].push_back(r.statistic);
          report.raw_samples.push_back(
              {r.m, to_string(r.id), rep_index, r.statistic});
        }
      }
      ++rep_index;
    }
    note_discards(report, cfg, discards);

    for (const auto& [mk, values] : samples) {
      const auto [m, id] = mk;
      NullSummary s;
      s.m = m;
      s.test = to_string(id);
      s.df = std::max(3 * m - cfg.fit.spec.mean_df(), 1);
      const double cnt = static_cast<double>(values.size());
      for (double v : values) s.mean += v;
      s.mean /= cnt;
      for (double v : values) s.variance += (v - s.mean) * (v - s.mean);
      s.variance /= cnt;
      s.ks = ks_distance_chi2(values, s.df);
      report.null_summaries.push_back(s);
    }
    std::cerr << "null-distribution: dgp=" << cfg.dgp.name << " n=" << n
              << " discards=" << discards << '\n';
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, int workers) {
  switch (cfg.kind) {
    case ExperimentKind::Size: return run_size(cfg, workers);
    case ExperimentKind::Power: return run_power(cfg, workers);
    case ExperimentKind::Contamination: return run_contamination(cfg, workers);
    case ExperimentKind::NullDistribution:
      return sample_null_distribution(cfg, workers);
  }
  throw std::logic_error("unknown experiment kind");
}

// ---- configuration I/O --------------------------------------------------

namespace {

std::string kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Size: return "size";
    case ExperimentKind::Power: return "power";
    case ExperimentKind::Contamination: return "contamination";
    case ExperimentKind::NullDistribution: return "null_distribution";
  }
  throw std::logic_error("unknown experiment kind");
}

NamedDgp named_dgp_from_json(const nlohmann::json& j) {
  NamedDgp out;
  if (j.contains("preset")) {
    out.name = j.at("preset").get<std::string>();
    std::optional<double> param;
    if (j.contains("param")) param = j.at("param").get<double>();
    out.spec = preset(out.name, param);
    if (j.contains("innovation"))
      out.spec.innovation = innovation_from_json(j.at("innovation"));
  } else if (j.contains("spec")) {
    // "name" survives a to_json round trip so reloaded configs keep their
    // preset-derived stream keys
    out.name = j.value("name", "custom");
    out.spec = dgp_from_json(j.at("spec"));
  } else {
    throw std::invalid_argument("dgp entry needs 'preset' or 'spec'");
  }
  return out;
}

nlohmann::json named_dgp_to_json(const NamedDgp& d) {
  return {{"name", d.name}, {"spec", to_json(d.spec)}};
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "size") {
    cfg.kind = ExperimentKind::Size;
  } else if (kind == "power") {
    cfg.kind = ExperimentKind::Power;
  } else if (kind == "contamination") {
    cfg.kind = ExperimentKind::Contamination;
  } else if (kind == "null_distribution") {
    cfg.kind = ExperimentKind::NullDistribution;
  } else {
    throw std::invalid_argument("config: unknown kind '" + kind + "'");
  }

  if (j.contains("dgp")) cfg.dgp = named_dgp_from_json(j.at("dgp"));
  if (cfg.kind != ExperimentKind::Contamination && !j.contains("dgp"))
    throw std::invalid_argument("config: missing 'dgp'");

  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    if (f.value("ar_bic", false)) {
      cfg.fit.ar_bic = true;
    } else {
      cfg.fit.spec = model_spec_from_string(f.at("model").get<std::string>());
    }
  } else if (cfg.kind == ExperimentKind::Contamination) {
    cfg.fit.ar_bic = true;  // AR sieve under the linearity null
  } else {
    throw std::invalid_argument("config: missing 'fit'");
  }

  cfg.n_list = j.at("n").get<std::vector<std::size_t>>();
  if (cfg.n_list.empty()) throw std::invalid_argument("config: empty 'n'");

  if (j.contains("m")) {
    if (j.at("m").is_string()) {
      if (j.at("m").get<std::string>() != "sqrt")
        throw std::invalid_argument("config: 'm' must be a list or \"sqrt\"");
      cfg.m_sqrt_rule = true;
    } else {
      cfg.m_list = j.at("m").get<std::vector<int>>();
    }
  } else {
    cfg.m_sqrt_rule = true;
  }

  cfg.replications = j.value("replications", 1000);
  if (cfg.replications < 100)
    throw std::invalid_argument("config: replications must be >= 100");
  cfg.alpha = j.value("alpha", 0.05);
  if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0)
    throw std::invalid_argument("config: alpha must be in (0, 1]");

  if (j.contains("tests")) {
    for (const auto& t : j.at("tests"))
      cfg.tests.push_back(test_id_from_string(t.get<std::string>()));
  } else {
    cfg.tests = {TestId::C12, TestId::C21, TestId::Q11, TestId::Q12,
                 TestId::Q21, TestId::Q22, TestId::WL};
  }

  cfg.grid = j.value("grid", std::vector<double>{});
  cfg.omega_sq_grid = j.value("omega_sq", std::vector<double>{});
  if (j.contains("linear"))
    for (const auto& d : j.at("linear"))
      cfg.linear_dgps.push_back(named_dgp_from_json(d));
  if (j.contains("nonlinear"))
    for (const auto& d : j.at("nonlinear"))
      cfg.nonlinear_dgps.push_back(named_dgp_from_json(d));
  if (cfg.kind == ExperimentKind::Contamination && cfg.linear_dgps.empty())
    throw std::invalid_argument("config: contamination needs 'linear' DGPs");

  cfg.master_seed = j.value("seed", 20260824ULL);
  cfg.scaling.gaussian_limits = j.value("gaussian_limits", false);
  cfg.max_attempts = j.value("max_attempts", 50);
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["kind"] = kind_name(cfg.kind);
  if (!cfg.dgp.name.empty()) j["dgp"] = named_dgp_to_json(cfg.dgp);
  if (cfg.fit.ar_bic) {
    j["fit"] = {{"ar_bic", true}};
  } else {
    j["fit"] = {{"model", cfg.fit.spec.to_string()}};
  }
  j["n"] = cfg.n_list;
  if (cfg.m_sqrt_rule) {
    j["m"] = "sqrt";
  } else {
    j["m"] = cfg.m_list;
  }
  j["replications"] = cfg.replications;
  j["alpha"] = cfg.alpha;
  std::vector<std::string> tests;
  for (TestId id : cfg.tests) tests.push_back(to_string(id));
  j["tests"] = tests;
  if (!cfg.grid.empty()) j["grid"] = cfg.grid;
  if (!cfg.omega_sq_grid.empty()) j["omega_sq"] = cfg.omega_sq_grid;
  if (!cfg.linear_dgps.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : cfg.linear_dgps) arr.push_back(named_dgp_to_json(d));
    j["linear"] = arr;
  }
  if (!cfg.nonlinear_dgps.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : cfg.nonlinear_dgps)
      arr.push_back(named_dgp_to_json(d));
    j["nonlinear"] = arr;
  }
  j["seed"] = cfg.master_seed;
  j["gaussian_limits"] = cfg.scaling.gaussian_limits;
  j["max_attempts"] = cfg.max_attempts;
  return j;
}

void write_report_csv(const ExperimentReport& report, std::ostream& os) {
  os << "dgp,group,test,n,m,grid_value,omega_sq,frequency,se,replications,"
        "discards\n";
  char buf[64];
  const auto num = [&](double v, const char* fmt) {
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  for (const auto& c : report.cells) {
    os << c.dgp << ',' << c.group << ',' << c.test << ',' << c.n << ','
       << c.m << ',';
    if (c.has_grid) os << num(c.grid_value, "%.6g");
    os << ',';
    if (c.has_omega_sq) os << num(c.omega_sq, "%.6g");
    os << ',' << num(c.frequency, "%.6f") << ',' << num(c.se, "%.6f") << ','
       << c.replications << ',' << c.discards << '\n';
  }
}

void write_samples_csv(const ExperimentReport& report, std::ostream& os) {
  os << "m,test,replication,value\n";
  char buf[64];
  for (const auto& s : report.raw_samples) {
    std::snprintf(buf, sizeof buf, "%.10g", s.value);
    os << s.m << ',' << s.test << ',' << s.replication << ',' << buf << '\n';
  }
}

nlohmann::json report_to_json(const ExperimentReport& report,
                              const ExperimentConfig& config) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cell = {{"dgp", c.dgp},
                           {"test", c.test},
                           {"n", c.n},
                           {"m", c.m},
                           {"frequency", c.frequency},
                           {"se", c.se},
                           {"replications", c.replications},
                           {"discards", c.discards}};
    if (!c.group.empty()) cell["group"] = c.group;
    if (c.has_grid) cell["grid_value"] = c.grid_value;
    if (c.has_omega_sq) cell["omega_sq"] = c.omega_sq;
    cells.push_back(cell);
  }
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : report.null_summaries)
    summaries.push_back({{"m", s.m},
                         {"test", s.test},
                         {"df", s.df},
                         {"mean", s.mean},
                         {"variance", s.variance},
                         {"ks", s.ks}});
  return {{"config", to_json(config)},
          {"cells", cells},
          {"null_summaries", summaries},
          {"total_discards", report.total_discards},
          {"discard_flagged", report.discard_flagged}};
}

}  // namespace portes
