#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flexgt/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  long seeds = 0;
  int threads = -1;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool config_required) {
  auto* c = sub->add_option("--config", opts.config, "experiment config (JSON)");
  if (config_required) c->required();
  sub->add_option("--out", opts.out, "output directory (overrides config)");
  sub->add_option("--seeds", opts.seeds, "number of seeds (overrides config)");
  sub->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
}

flexgt::ExperimentConfig resolve(const CommonOpts& opts) {
  flexgt::ExperimentConfig cfg;
  if (!opts.config.empty()) cfg = flexgt::load_config(opts.config);
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  if (opts.seeds > 0) {
    cfg.seeds.clear();
    for (long s = 0; s < opts.seeds; ++s) cfg.seeds.push_back(s);
  }
  if (opts.threads >= 0) cfg.threads = opts.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "flexgt: decentralized stochastic optimization simulator with snapshot "
      "gradient tracking and tunable communication/computation rounds"};
  app.require_subcommand(1);

  CommonOpts run_opts, compare_opts, pareto_opts, verify_opts;
  auto* run_cmd =
      app.add_subcommand("run", "run configured algorithms, one CSV+JSON per "
                                "(algorithm, seed)");
  add_common(run_cmd, run_opts, true);
  auto* compare_cmd = app.add_subcommand(
      "compare", "run all algorithms on identical problem/seeds and emit "
                 "per-round residuals");
  add_common(compare_cmd, compare_opts, true);
  auto* pareto_cmd = app.add_subcommand(
      "pareto", "sweep the (alpha, beta) grid and emit empirical + analytic "
                "cost frontiers");
  add_common(pareto_cmd, pareto_opts, true);
  auto* verify_cmd = app.add_subcommand(
      "verify", "run the property suite and write a pass/fail report");
  add_common(verify_cmd, verify_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return flexgt::cmd_run(resolve(run_opts));
    if (*compare_cmd) return flexgt::cmd_compare(resolve(compare_opts));
    if (*pareto_cmd) return flexgt::cmd_pareto(resolve(pareto_opts));
    if (*verify_cmd) return flexgt::cmd_verify(resolve(verify_opts));
  } catch (const flexgt::ConfigError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const flexgt::DivergenceError& e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
