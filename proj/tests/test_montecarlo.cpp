#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "portes/montecarlo.hpp"

using namespace portes;
using nlohmann::json;

namespace {

json base_size_config() {
  return {{"kind", "size"},
          {"dgp", {{"preset", "A1"}}},
          {"fit", {{"model", "ar(1)"}}},
          {"n", {150}},
          {"m", {4}},
          {"replications", 100},
          {"tests", {"C12", "Q22"}},
          {"seed", 9001}};
}

std::string csv(const ExperimentReport& report) {
  std::ostringstream os;
  write_report_csv(report, os);
  return os.str();
}

const CellResult* find_cell(const ExperimentReport& r, const std::string& test,
                            double grid = -1.0) {
  for (const auto& c : r.cells)
    if (c.test == test && (grid < 0.0 || c.grid_value == grid ||
                           c.omega_sq == grid))
      return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("config json round trip") {
  auto cfg = config_from_json(base_size_config());
  CHECK(cfg.kind == ExperimentKind::Size);
  CHECK(cfg.dgp.name == "A1");
  CHECK(cfg.fit.spec.p == 1);
  CHECK_FALSE(cfg.fit.ar_bic);
  CHECK(cfg.n_list == std::vector<std::size_t>{150});
  CHECK(cfg.m_list == std::vector<int>{4});
  CHECK(cfg.replications == 100);
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.master_seed == 9001);
  auto back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("config validation") {
  auto j = base_size_config();
  j["replications"] = 50;  // below the floor of 100
  CHECK_THROWS(config_from_json(j));

  j = base_size_config();
  j["alpha"] = 1.5;
  CHECK_THROWS(config_from_json(j));

  j = base_size_config();
  j["kind"] = "mystery";
  CHECK_THROWS(config_from_json(j));

  j = base_size_config();
  j["m"] = "cubert";
  CHECK_THROWS(config_from_json(j));

  j = base_size_config();
  j.erase("dgp");
  CHECK_THROWS(config_from_json(j));

  json c = {{"kind", "contamination"}, {"n", {100}}, {"m", {3}},
            {"replications", 100}};
  CHECK_THROWS(run_experiment(config_from_json(c)));
}

TEST_CASE("sqrt rule resolves m from n") {
  auto j = base_size_config();
  j["m"] = "sqrt";
  j["n"] = {150, 400};
  auto report = run_experiment(config_from_json(j));
  bool saw12 = false, saw20 = false;
  for (const auto& c : report.cells) {
    if (c.n == 150) { CHECK(c.m == 12); saw12 = true; }
    if (c.n == 400) { CHECK(c.m == 20); saw20 = true; }
  }
  CHECK(saw12);
  CHECK(saw20);
}

TEST_CASE("alpha = 1 rejects everything") {
  auto j = base_size_config();
  j["alpha"] = 1.0;
  auto report = run_experiment(config_from_json(j));
  REQUIRE_FALSE(report.cells.empty());
  for (const auto& c : report.cells) {
    CHECK(c.frequency == 1.0);
    CHECK(c.se == 0.0);
  }
}

TEST_CASE("cell layout and binomial standard errors") {
  auto j = base_size_config();
  j["n"] = {120, 150};
  j["m"] = {3, 5};
  auto report = run_experiment(config_from_json(j));
  CHECK(report.cells.size() == 2 * 2 * 2);  // n x m x tests
  for (const auto& c : report.cells) {
    CHECK(c.replications > 90);
    const double se =
        std::sqrt(c.frequency * (1.0 - c.frequency) / c.replications);
    CHECK(c.se == doctest::Approx(se).epsilon(1e-12));
    CHECK(c.frequency >= 0.0);
    CHECK(c.frequency <= 1.0);
    CHECK(c.frequency < 0.25);  // a correctly sized test at alpha = .05
  }
}

TEST_CASE("worker count never changes the results") {
  auto j = base_size_config();
  j["n"] = {200};
  auto cfg = config_from_json(j);
  auto r1 = run_size(cfg, 1);
  auto r3 = run_size(cfg, 3);
  CHECK(csv(r1) == csv(r3));

  json p = {{"kind", "power"},
            {"dgp", {{"preset", "B1"}}},
            {"fit", {{"ar_bic", true}}},
            {"n", {150}},
            {"m", {4}},
            {"replications", 100},
            {"grid", {0.0, 0.6}},
            {"tests", {"C12", "C21", "Q12", "Q21"}},
            {"seed", 42}};
  auto pc = config_from_json(p);
  CHECK(csv(run_power(pc, 1)) == csv(run_power(pc, 4)));
}

TEST_CASE("power run emits grid cells and the aggregates") {
  json p = {{"kind", "power"},
            {"dgp", {{"preset", "B2"}}},
            {"fit", {{"ar_bic", true}}},
            {"n", {200}},
            {"m", {5}},
            {"replications", 150},
            {"grid", {0.0, 0.8}},
            {"tests", {"C12", "C21", "Q12", "Q21"}},
            {"seed", 7}};
  auto report = run_experiment(config_from_json(p));
  // 2 grid points x (4 tests + Cstar + Qstar)
  CHECK(report.cells.size() == 12);
  for (double g : {0.0, 0.8}) {
    double c12 = -1, c21 = -1, cstar = -1;
    for (const auto& c : report.cells) {
      if (!c.has_grid || c.grid_value != g) continue;
      if (c.test == "C12") c12 = c.frequency;
      if (c.test == "C21") c21 = c.frequency;
      if (c.test == "Cstar") cstar = c.frequency;
    }
    REQUIRE(cstar >= 0.0);
    CHECK(cstar == doctest::Approx(std::max(c12, c21)));
  }
  // the RCA alternative at coefficient noise 0.8 must be detected far more
  // often than at the null point
  const auto* null_cell = find_cell(report, "Cstar", 0.0);
  const auto* alt_cell = find_cell(report, "Cstar", 0.8);
  REQUIRE(null_cell);
  REQUIRE(alt_cell);
  CHECK(alt_cell->frequency > null_cell->frequency + 0.2);
}

TEST_CASE("contamination at omega_sq zero reproduces the size run") {
  json c = {{"kind", "contamination"},
            {"linear", {{{"preset", "A1"}}}},
            {"n", {150}},
            {"m", {4}},
            {"replications", 100},
            {"omega_sq", {0.0, 0.05}},
            {"tests", {"C12", "Q22"}},
            {"seed", 9001}};
  auto creport = run_experiment(config_from_json(c));

  auto s = base_size_config();
  s["fit"] = {{"ar_bic", true}};  // contamination always refits by BIC
  auto sreport = run_experiment(config_from_json(s));

  for (const char* test : {"C12", "Q22"}) {
    const CellResult* from_size = nullptr;
    for (const auto& cell : sreport.cells)
      if (cell.test == test) from_size = &cell;
    const CellResult* at_zero = nullptr;
    for (const auto& cell : creport.cells)
      if (cell.test == test && cell.omega_sq == 0.0) at_zero = &cell;
    REQUIRE(from_size);
    REQUIRE(at_zero);
    // identical streams: the contaminated run at omega^2 = 0 replays the
    // size run replication by replication
    CHECK(at_zero->frequency == from_size->frequency);
    CHECK(at_zero->group == "linear");
  }
  // grid membership is recorded on every cell
  for (const auto& cell : creport.cells) CHECK(cell.has_omega_sq);
}

TEST_CASE("null distribution summaries") {
  json c = {{"kind", "null_distribution"},
            {"dgp", {{"preset", "A1"}}},
            {"fit", {{"model", "ar(1)"}}},
            {"n", {300}},
            {"m", {4}},
            {"replications", 300},
            {"seed", 11}};
  auto report = run_experiment(config_from_json(c));
  REQUIRE(report.null_summaries.size() == 4);  // Cdot12, Cdot21, C12, C21
  for (const auto& s : report.null_summaries) {
    CHECK(s.m == 4);
    CHECK(s.df == 11);  // 3m - (p+q)
    CHECK(s.mean == doctest::Approx(11.0).epsilon(0.15));
    CHECK(s.ks < 0.1);
  }
  CHECK(report.raw_samples.size() >= 4 * 295);
  std::ostringstream os;
  write_samples_csv(report, os);
  CHECK(os.str().rfind("m,test,replication,value", 0) == 0);
}

TEST_CASE("ks distance identifies the right chi-squared") {
  RngStream rng(13, 1);
  std::vector<double> sample(2000);
  for (auto& v : sample) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double z = rng.normal();
      s += z * z;
    }
    v = s;
  }
  CHECK(ks_distance_chi2(sample, 3) < 0.05);
  CHECK(ks_distance_chi2(sample, 8) > 0.3);
}

TEST_CASE("report serialization is stable and complete") {
  auto cfg = config_from_json(base_size_config());
  auto report = run_experiment(cfg);
  const std::string text = csv(report);
  CHECK(text.rfind("dgp,group,test,n,m,grid_value,omega_sq,frequency,se,"
                   "replications,discards",
                   0) == 0);
  CHECK(csv(run_experiment(cfg)) == text);  // rerun is byte identical

  auto j = report_to_json(report, cfg);
  CHECK(j.contains("config"));
  CHECK(j.at("cells").size() == report.cells.size());
  CHECK_FALSE(j.dump().find("wall") != std::string::npos);
}

TEST_CASE("custom dgp specs feed the harness") {
  json c = {{"kind", "size"},
            {"dgp",
             {{"spec",
               {{"mean",
                 {{"type", "arma"}, {"ar", {0.3}}, {"intercept", 0.0}}},
                {"variance", {{"type", "constant"}, {"sigma2", 1.0}}},
                {"innovation", {{"law", "normal"}}}}}}},
            {"fit", {{"model", "ar(1)"}}},
            {"n", {150}},
            {"m", {3}},
            {"replications", 100},
            {"tests", {"Q22"}},
            {"seed", 3}};
  auto cfg = config_from_json(c);
  CHECK(cfg.dgp.name == "custom");
  auto report = run_experiment(cfg);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].frequency < 0.25);
}
