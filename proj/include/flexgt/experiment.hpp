#ifndef FLEXGT_EXPERIMENT_HPP
#define FLEXGT_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexgt/complexity.hpp"
#include "flexgt/metrics.hpp"

namespace flexgt {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct AlgoSpec {
  std::string name;  // unique label, used in file names
  Method method = Method::flexgt;
  Protocol protocol = Protocol::direct;
  int alpha = 1;
  int beta = 1;
  bool gamma_auto = true;
  double gamma = 0.0;  // explicit stepsize when gamma_auto is false
};

/// Stepsize policy for "auto" resolution. `theory` is the analysis-backed rule
/// (stepsize_rule); `empirical` is gamma = c (1-r)^2 / (r b L) capped at the
/// theory rule's first term, the rule used for the convergence comparisons.
struct GammaRule {
  enum class Kind { theory, empirical } kind = Kind::theory;
  double c = 10.0;
};

struct ExperimentConfig {
  // problem
  std::string family = "ridge";
  int n = 20, p = 10;
  double mu = 0.001, sigma = 0.1;
  std::uint64_t problem_seed = 7;
  std::string noise_model = "total";
  int nc_samples = 20;
  double nc_lambda = 0.1;

  // topology
  GraphKind kind = GraphKind::exponential;
  int degree = 5;

  // algorithms
  std::vector<AlgoSpec> algorithms;

  // run control
  long rounds = 100;
  std::vector<std::uint64_t> seeds = {0};
  double epsilon = 1e-3;
  CostMetric metric = CostMetric::opt_gap;
  bool normalize = true;  // epsilon measured on the residual opt_gap/opt_gap_0
  GammaRule gamma_rule;
  double stepsize_scale = 1.0;
  int threads = 0;  // 0 = hardware concurrency

  // pareto grid
  int alpha_min = 1, alpha_max = 8;
  int beta_min = 1, beta_max = 8;

  std::string out_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
nlohmann::json resolved_config_json(const ExperimentConfig& cfg);

Problem make_problem(const ExperimentConfig& cfg);
MixingOperator make_operator_for(const ExperimentConfig& cfg,
                                 const AlgoSpec& alg);
/// Resolves "auto" gamma via the configured rule, then applies stepsize_scale.
double resolve_gamma(const ExperimentConfig& cfg, const AlgoSpec& alg,
                     const Problem& problem, const MixingOperator& op);
AlgoConfig resolve_algo(const ExperimentConfig& cfg, const AlgoSpec& alg,
                        const Problem& problem, const MixingOperator& op);

/// Runs fn(i) for i in [0, count) on a small worker pool. Results must not
/// depend on scheduling; outputs are written by the caller afterwards.
void parallel_for(long count, int threads, const std::function<void(long)>& fn);

// Subcommand drivers. Each returns a process exit code:
//   0 success, 1 validation error, 2 check failure.
int cmd_run(const ExperimentConfig& cfg);
int cmd_compare(const ExperimentConfig& cfg);
int cmd_pareto(const ExperimentConfig& cfg);
int cmd_verify(const ExperimentConfig& cfg);

/// Full property suite driven by cmd_verify; returned so tests can inspect it.
struct VerifyOutcome {
  bool pass = true;
  nlohmann::json report;
};
VerifyOutcome run_verify_suite(const ExperimentConfig& cfg);

void write_text_atomic(const std::filesystem::path& file,
                       const std::string& content);

}  // namespace flexgt

#endif  // FLEXGT_EXPERIMENT_HPP
