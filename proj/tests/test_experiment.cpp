#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "flexgt/experiment.hpp"
#include "flexgt/rng.hpp"

using namespace flexgt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static std::uint64_t state = 0x1234567;
  const fs::path dir = fs::temp_directory_path() /
                       ("flexgt_" + tag + "_" + std::to_string(splitmix64(state)));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json base_config_json() {
  return nlohmann::json{
      {"problem",
       {{"family", "ridge"}, {"n", 20}, {"p", 10}, {"mu", 0.5}, {"sigma", 0.1},
        {"seed", 7}}},
      {"topology", {{"kind", "exponential"}, {"degree", 5}}},
      {"algorithms",
       {{{"name", "flexgt"}, {"method", "flexgt"}, {"protocol", "direct"},
         {"alpha", 3}, {"beta", 3}, {"gamma", "auto"}}}},
      {"rounds", 100},
      {"seeds", 1},
      {"epsilon", 1e-3}};
}

ExperimentConfig verify_config(double scale) {
  ExperimentConfig cfg;
  cfg.family = "ridge";
  cfg.n = 20;
  cfg.p = 10;
  cfg.mu = 1.0;
  cfg.sigma = 0.1;
  cfg.problem_seed = 7;
  cfg.kind = GraphKind::exponential;
  cfg.degree = 5;
  cfg.algorithms = {{"flexgt", Method::flexgt, Protocol::direct, 2, 2, true, 0.0}};
  cfg.stepsize_scale = scale;
  return cfg;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  auto j = base_config_json();
  j["algorithms"][0]["beta"] = 0;
  try {
    (void)parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }

  j = base_config_json();
  j["problem"]["mu"] = 0.0;
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = base_config_json();
  j["problem"]["family"] = "mystery";
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = base_config_json();
  j["algorithms"][0]["gamma"] = "fast";
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = base_config_json();
  j["rounds"] = 0;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("seed lists and counts both parse") {
  auto j = base_config_json();
  j["seeds"] = 4;
  CHECK(parse_config(j).seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
  j["seeds"] = {11, 22};
  CHECK(parse_config(j).seeds == std::vector<std::uint64_t>{11, 22});
}

TEST_CASE("acc-flexgt shorthand resolves to the accelerated protocol") {
  auto j = base_config_json();
  j["algorithms"][0]["method"] = "acc-flexgt";
  const auto cfg = parse_config(j);
  CHECK(cfg.algorithms[0].method == Method::flexgt);
  CHECK(cfg.algorithms[0].protocol == Protocol::accelerated);
}

TEST_CASE("auto gamma resolves through the configured rule") {
  const auto cfg = parse_config(base_config_json());
  const Problem prob = make_problem(cfg);
  const auto op = make_operator_for(cfg, cfg.algorithms[0]);
  const double g = resolve_gamma(cfg, cfg.algorithms[0], prob, op);
  CHECK(g == doctest::Approx(stepsize_rule(Regime::strongly_convex, prob.L(),
                                           3, op.rho_bar))
                 .epsilon(1e-15));

  ExperimentConfig emp = cfg;
  emp.gamma_rule.kind = GammaRule::Kind::empirical;
  emp.gamma_rule.c = 10.0;
  const double ge = resolve_gamma(emp, cfg.algorithms[0], prob, op);
  const double cap = 1.0 / (4.0 * std::sqrt(2.0) * 3 * prob.L());
  CHECK(ge <= cap * (1 + 1e-15));
  CHECK(ge > 0.0);

  ExperimentConfig scaled = cfg;
  scaled.stepsize_scale = 10.0;
  CHECK(resolve_gamma(scaled, cfg.algorithms[0], prob, op) ==
        doctest::Approx(10.0 * g).epsilon(1e-15));
}

TEST_CASE("cmd_run writes one deterministic CSV and JSON per (alg, seed)") {
  auto cfg = parse_config(base_config_json());
  const fs::path out = fresh_dir("run");
  cfg.out_dir = out.string();
  CHECK(cmd_run(cfg) == 0);

  const fs::path csv = out / "flexgt_seed0.csv";
  const fs::path json = out / "flexgt_seed0.json";
  REQUIRE(fs::exists(csv));
  REQUIRE(fs::exists(json));

  const std::string body = slurp(csv);
  // 1 comment + 1 header + 101 records
  CHECK(std::count(body.begin(), body.end(), '\n') == 103);
  CHECK(body.rfind("# {", 0) == 0);
  CHECK(body.find("resolved_gamma") != std::string::npos);

  const auto j = nlohmann::json::parse(slurp(json));
  CHECK(j.at("records").size() == 101);
  CHECK(j.at("run").at("version").is_string());
  CHECK(j.at("run").at("resolved_gamma").is_number());

  // rerun must be byte-identical
  const fs::path out2 = fresh_dir("run2");
  cfg.out_dir = out2.string();
  CHECK(cmd_run(cfg) == 0);
  CHECK(slurp(out2 / "flexgt_seed0.csv") == body);
}

TEST_CASE("cmd_compare needs two algorithms and emits residual columns") {
  auto j = base_config_json();
  auto cfg = parse_config(j);
  cfg.out_dir = fresh_dir("cmp_bad").string();
  CHECK_THROWS_AS(cmd_compare(cfg), ConfigError);

  j["algorithms"].push_back({{"name", "dsgd"}, {"method", "dsgd"},
                             {"alpha", 3}, {"beta", 3}, {"gamma", 0.02}});
  j["rounds"] = 50;
  j["seeds"] = 2;
  cfg = parse_config(j);
  const fs::path out = fresh_dir("cmp");
  cfg.out_dir = out.string();
  CHECK(cmd_compare(cfg) == 0);
  const std::string body = slurp(out / "compare.csv");
  CHECK(body.find("flexgt_residual") != std::string::npos);
  CHECK(body.find("dsgd_residual") != std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(out / "compare.json"));
  CHECK(summary.at("algorithms").contains("flexgt"));
  CHECK(summary.at("algorithms").contains("dsgd"));
}

TEST_CASE("cmd_pareto writes empirical and analytic grids with flags") {
  auto j = base_config_json();
  j["rounds"] = 400;
  j["seeds"] = 2;
  j["epsilon"] = 1e-2;
  j["pareto"] = {{"alpha", {1, 2}}, {"beta", {1, 2}}};
  auto cfg = parse_config(j);
  const fs::path out = fresh_dir("pareto");
  cfg.out_dir = out.string();
  CHECK(cmd_pareto(cfg) == 0);
  const std::string emp = slurp(out / "pareto_empirical.csv");
  CHECK(emp.find("alpha,beta,comm,comp,pareto_flag,reach_fraction") !=
        std::string::npos);
  CHECK(std::count(emp.begin(), emp.end(), '\n') == 6);  // comment+header+4 cells
  const std::string ana = slurp(out / "pareto_analytic.csv");
  CHECK(std::count(ana.begin(), ana.end(), '\n') == 6);
  const auto summary = nlohmann::json::parse(slurp(out / "pareto_summary.json"));
  CHECK(summary.at("cells") == 4);
}

TEST_CASE("verify suite passes at the covered stepsize") {
  const auto outcome = run_verify_suite(verify_config(1.0));
  CHECK(outcome.pass);
  const auto& checks = outcome.report.at("checks");
  for (const auto& name :
       {"mixing_bound_direct", "averaging_preservation", "tracking_identity",
        "loop_compact_equivalence", "single_rate_reduction",
        "centralized_reduction", "lemma_contractions", "lyapunov_contraction",
        "lyapunov_monotone"}) {
    INFO(name);
    CHECK(checks.at(name).at("pass") == true);
  }
  // the accelerated envelope overshoot is reported but not fatal
  CHECK(checks.at("mixing_bound_accelerated").at("fatal") == false);
}

TEST_CASE("verify suite flags contraction violations at 10x stepsize") {
  const auto outcome = run_verify_suite(verify_config(10.0));
  CHECK_FALSE(outcome.pass);
  const auto& c = outcome.report.at("checks").at("lyapunov_contraction");
  CHECK(c.at("pass") == false);
  CHECK(c.at("violations").get<long>() > 0);
}

TEST_CASE("atomic writer creates parent directories") {
  const fs::path dir = fresh_dir("atomic");
  const fs::path f = dir / "a" / "b" / "c.txt";
  write_text_atomic(f, "payload");
  CHECK(slurp(f) == "payload");
  CHECK_FALSE(fs::exists(f.string() + ".tmp"));
}
