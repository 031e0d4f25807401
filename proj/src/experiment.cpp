#include "flexgt/experiment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "flexgt/rng.hpp"

namespace flexgt {

namespace fs = std::filesystem;

namespace {

const char* kVersion =
#ifdef FLEXGT_VERSION
    FLEXGT_VERSION;
#else
    "0.0.0";
#endif

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  const auto prob = j.value("problem", nlohmann::json::object());
  cfg.family = get_or<std::string>(prob, "family", cfg.family);
  if (cfg.family != "ridge" && cfg.family != "least_squares" &&
      cfg.family != "logistic_nc")
    throw ConfigError("problem.family must be ridge, least_squares or logistic_nc");
  cfg.n = get_or<int>(prob, "n", cfg.n);
  cfg.p = get_or<int>(prob, "p", cfg.p);
  if (cfg.n < 1) throw ConfigError("problem.n must be >= 1");
  if (cfg.p < 1) throw ConfigError("problem.p must be >= 1");
  cfg.mu = get_or<double>(prob, "mu", cfg.mu);
  cfg.sigma = get_or<double>(prob, "sigma", cfg.sigma);
  if (cfg.sigma < 0) throw ConfigError("problem.sigma must be >= 0");
  if (cfg.family == "ridge" && cfg.mu <= 0)
    throw ConfigError("problem.mu must be > 0 for ridge");
  cfg.problem_seed = get_or<std::uint64_t>(prob, "seed", cfg.problem_seed);
  cfg.noise_model = get_or<std::string>(prob, "noise_model", cfg.noise_model);
  if (cfg.noise_model != "total" && cfg.noise_model != "per_coordinate")
    throw ConfigError("problem.noise_model must be total or per_coordinate");
  cfg.nc_samples = get_or<int>(prob, "samples_per_node", cfg.nc_samples);
  cfg.nc_lambda = get_or<double>(prob, "lambda", cfg.nc_lambda);

  const auto topo = j.value("topology", nlohmann::json::object());
  cfg.kind = parse_graph_kind(get_or<std::string>(topo, "kind", "exponential"));
  cfg.degree = get_or<int>(topo, "degree", cfg.degree);

  cfg.algorithms.clear();
  for (std::size_t idx = 0; idx < j.value("algorithms", nlohmann::json::array()).size(); ++idx) {
    const auto& a = j.at("algorithms").at(idx);
    const std::string where = "algorithms[" + std::to_string(idx) + "]";
    AlgoSpec spec;
    std::string method = get_or<std::string>(a, "method", "flexgt");
    if (method == "acc-flexgt") {
      spec.method = Method::flexgt;
      spec.protocol = Protocol::accelerated;
    } else {
      spec.method = parse_method(method);
      spec.protocol =
          parse_protocol(get_or<std::string>(a, "protocol", "direct"));
    }
    spec.alpha = get_or<int>(a, "alpha", 1);
    spec.beta = get_or<int>(a, "beta", 1);
    if (spec.alpha < 1) throw ConfigError(where + ".alpha must be >= 1");
    if (spec.beta < 1) throw ConfigError(where + ".beta must be >= 1");
    if (a.contains("gamma") && a.at("gamma").is_number()) {
      spec.gamma_auto = false;
      spec.gamma = a.at("gamma").get<double>();
      if (spec.gamma <= 0) throw ConfigError(where + ".gamma must be > 0");
    } else if (a.contains("gamma") && a.at("gamma") != "auto") {
      throw ConfigError(where + ".gamma must be a number or \"auto\"");
    }
    spec.name = get_or<std::string>(a, "name",
                                    method + "_a" + std::to_string(spec.alpha) +
                                        "_b" + std::to_string(spec.beta));
    cfg.algorithms.push_back(spec);
  }

  cfg.rounds = get_or<long>(j, "rounds", cfg.rounds);
  if (cfg.rounds < 1) throw ConfigError("rounds must be >= 1");

  if (j.contains("seeds")) {
    if (j.at("seeds").is_number_integer()) {
      const long count = j.at("seeds").get<long>();
      if (count < 1) throw ConfigError("seeds must be >= 1");
      cfg.seeds.clear();
      for (long s = 0; s < count; ++s) cfg.seeds.push_back(s);
    } else if (j.at("seeds").is_array()) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
    } else {
      throw ConfigError("seeds must be a count or a list");
    }
  }

  cfg.epsilon = get_or<double>(j, "epsilon", cfg.epsilon);
  if (cfg.epsilon <= 0) throw ConfigError("epsilon must be > 0");
  cfg.metric = parse_cost_metric(get_or<std::string>(j, "metric", "opt_gap"));
  cfg.normalize = get_or<bool>(j, "normalize", cfg.normalize);

  if (j.contains("gamma_rule")) {
    const auto& g = j.at("gamma_rule");
    if (g.is_string() && g == "theory") {
      cfg.gamma_rule.kind = GammaRule::Kind::theory;
    } else if (g.is_object() && g.contains("empirical")) {
      cfg.gamma_rule.kind = GammaRule::Kind::empirical;
      cfg.gamma_rule.c = get_or<double>(g.at("empirical"), "c", 10.0);
    } else {
      throw ConfigError("gamma_rule must be \"theory\" or {\"empirical\":{\"c\":..}}");
    }
  }
  cfg.stepsize_scale = get_or<double>(j, "stepsize_scale", cfg.stepsize_scale);
  if (cfg.stepsize_scale <= 0) throw ConfigError("stepsize_scale must be > 0");
  cfg.threads = get_or<int>(j, "threads", cfg.threads);

  if (j.contains("pareto")) {
    const auto& p = j.at("pareto");
    const auto ar = get_or<std::vector<int>>(p, "alpha", {1, 8});
    const auto br = get_or<std::vector<int>>(p, "beta", {1, 8});
    if (ar.size() != 2 || br.size() != 2)
      throw ConfigError("pareto.alpha and pareto.beta must be [min, max]");
    cfg.alpha_min = ar[0];
    cfg.alpha_max = ar[1];
    cfg.beta_min = br[0];
    cfg.beta_max = br[1];
    if (cfg.alpha_min < 1 || cfg.alpha_min > cfg.alpha_max)
      throw ConfigError("pareto.alpha range is invalid");
    if (cfg.beta_min < 1 || cfg.beta_min > cfg.beta_max)
      throw ConfigError("pareto.beta range is invalid");
  }

  cfg.out_dir = get_or<std::string>(j, "out", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

nlohmann::json resolved_config_json(const ExperimentConfig& cfg) {
  nlohmann::json algs = nlohmann::json::array();
  for (const auto& a : cfg.algorithms) {
    algs.push_back({{"name", a.name},
                    {"method", to_string(a.method)},
                    {"protocol", to_string(a.protocol)},
                    {"alpha", a.alpha},
                    {"beta", a.beta},
                    {"gamma", a.gamma_auto ? nlohmann::json("auto")
                                           : nlohmann::json(a.gamma)}});
  }
  return nlohmann::json{
      {"version", kVersion},
      {"problem",
       {{"family", cfg.family},
        {"n", cfg.n},
        {"p", cfg.p},
        {"mu", cfg.mu},
        {"sigma", cfg.sigma},
        {"seed", cfg.problem_seed},
        {"noise_model", cfg.noise_model}}},
      {"topology", {{"kind", to_string(cfg.kind)}, {"degree", cfg.degree}}},
      {"algorithms", algs},
      {"rounds", cfg.rounds},
      {"seeds", cfg.seeds},
      {"epsilon", cfg.epsilon},
      {"normalize", cfg.normalize},
      {"gamma_rule",
       cfg.gamma_rule.kind == GammaRule::Kind::theory
           ? nlohmann::json("theory")
           : nlohmann::json{{"empirical", {{"c", cfg.gamma_rule.c}}}}},
      {"stepsize_scale", cfg.stepsize_scale},
      {"pareto",
       {{"alpha", {cfg.alpha_min, cfg.alpha_max}},
        {"beta", {cfg.beta_min, cfg.beta_max}}}}};
}

Problem make_problem(const ExperimentConfig& cfg) {
  Problem prob = [&] {
    if (cfg.family == "ridge")
      return Problem::ridge(cfg.n, cfg.p, cfg.mu, cfg.sigma, cfg.problem_seed);
    if (cfg.family == "least_squares")
      return Problem::least_squares(cfg.n, cfg.p, cfg.sigma, cfg.problem_seed);
    return Problem::logistic_nonconvex(cfg.n, cfg.p, cfg.sigma,
                                       cfg.problem_seed, cfg.nc_samples,
                                       cfg.nc_lambda);
  }();
  prob.set_noise_model(cfg.noise_model == "total"
                           ? NoiseModel::total_variance
                           : NoiseModel::per_coordinate);
  return prob;
}

MixingOperator make_operator_for(const ExperimentConfig& cfg,
                                 const AlgoSpec& alg) {
  const Topology topo = build_topology(cfg.kind, cfg.n, cfg.degree);
  const MixingMatrix W = metropolis_weights(topo);
  return make_operator(W, alg.protocol, alg.alpha);
}

double resolve_gamma(const ExperimentConfig& cfg, const AlgoSpec& alg,
                     const Problem& problem, const MixingOperator& op) {
  double gamma = alg.gamma;
  if (alg.gamma_auto) {
    const double theory =
        stepsize_rule(problem.regime(), problem.L(), alg.beta, op.rho_bar);
    if (cfg.gamma_rule.kind == GammaRule::Kind::theory) {
      gamma = theory;
    } else {
      const double bL = alg.beta * problem.L();
      const double cap = problem.regime() == Regime::nonconvex
                             ? 1.0 / (4.0 * bL)
                             : 1.0 / (4.0 * std::sqrt(2.0) * bL);
      if (op.rho_bar <= 0.0) {
        gamma = cap;
      } else {
        const double emp = cfg.gamma_rule.c * (1.0 - op.rho_bar) *
                           (1.0 - op.rho_bar) / (op.rho_bar * bL);
        gamma = std::min(emp, cap);
      }
    }
  }
  return gamma * cfg.stepsize_scale;
}

AlgoConfig resolve_algo(const ExperimentConfig& cfg, const AlgoSpec& alg,
                        const Problem& problem, const MixingOperator& op) {
  AlgoConfig a;
  a.method = alg.method;
  a.protocol = alg.protocol;
  a.alpha = alg.alpha;
  a.beta = alg.beta;
  a.gamma = resolve_gamma(cfg, alg, problem, op);
  return a;
}

void parallel_for(long count, int threads, const std::function<void(long)>& fn) {
  if (count <= 0) return;
  long workers = threads > 0
                     ? threads
                     : static_cast<long>(std::thread::hardware_concurrency());
  workers = std::max<long>(1, std::min<long>(workers, count));
  if (workers == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lk(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void write_text_atomic(const fs::path& file, const std::string& content) {
  fs::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, file);
}

namespace {

struct Resolved {
  AlgoSpec spec;
  MixingOperator op;
  AlgoConfig algo;
};

std::vector<Resolved> resolve_all(const ExperimentConfig& cfg,
                                  const Problem& problem) {
  if (cfg.algorithms.empty())
    throw ConfigError("algorithms must list at least one entry");
  std::vector<Resolved> out;
  for (const auto& a : cfg.algorithms) {
    Resolved r{a, make_operator_for(cfg, a), {}};
    r.algo = resolve_algo(cfg, a, problem, r.op);
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json run_meta(const ExperimentConfig& cfg, const Resolved& r) {
  nlohmann::json j = resolved_config_json(cfg);
  j["resolved_gamma"] = r.algo.gamma;
  j["rho_bar"] = r.op.rho_bar;
  j["algorithm"] = r.spec.name;
  return j;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
  const Problem problem = make_problem(cfg);
  const auto resolved = resolve_all(cfg, problem);
  const fs::path out(cfg.out_dir);

  struct Item {
    const Resolved* r;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (const auto& r : resolved)
    for (auto s : cfg.seeds) items.push_back({&r, s});

  std::vector<Trajectory> trajs(items.size());
  parallel_for(static_cast<long>(items.size()), cfg.threads, [&](long i) {
    trajs[i] = run(problem, items[i].r->algo, items[i].r->op, cfg.rounds,
                   items[i].seed);
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const std::string stem =
        it.r->spec.name + "_seed" + std::to_string(it.seed);
    nlohmann::json j;
    to_json(j, trajs[i]);
    j["run"] = run_meta(cfg, *it.r);
    write_text_atomic(out / (stem + ".json"), j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "# " << run_meta(cfg, *it.r).dump() << "\n";
    const std::string body = trajectory_csv(trajs[i]);
    csv << body.substr(body.find('\n') + 1);  // replace meta line
    write_text_atomic(out / (stem + ".csv"), csv.str());
  }
  std::cout << "wrote " << items.size() << " trajectories to " << out.string()
            << "\n";
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
  if (cfg.algorithms.size() < 2)
    throw ConfigError("compare needs at least two algorithms");
  const Problem problem = make_problem(cfg);
  if (!problem.optimum())
    throw ConfigError("compare needs a problem with a closed-form optimum");
  const auto resolved = resolve_all(cfg, problem);
  const fs::path out(cfg.out_dir);

  const long rounds = cfg.rounds;
  const std::size_t n_seeds = cfg.seeds.size();
  // mean residual per algorithm per round, averaged over seeds
  std::vector<std::vector<double>> residual(
      resolved.size(), std::vector<double>(rounds + 1, 0.0));
  std::vector<std::vector<long>> comm(resolved.size()),
      comp(resolved.size());
  std::vector<double> mean_steps_to_eps(resolved.size(), 0.0);
  std::vector<long> reached(resolved.size(), 0);

  struct Item {
    std::size_t alg;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (std::size_t a = 0; a < resolved.size(); ++a)
    for (auto s : cfg.seeds) items.push_back({a, s});
  std::vector<Trajectory> trajs(items.size());
  parallel_for(static_cast<long>(items.size()), cfg.threads, [&](long i) {
    trajs[i] = run(problem, resolved[items[i].alg].algo, resolved[items[i].alg].op,
                   rounds, items[i].seed);
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = trajs[i];
    const std::size_t a = items[i].alg;
    const double base = t.records.front().opt_gap;
    for (long k = 0; k <= rounds; ++k)
      residual[a][k] += t.records[k].opt_gap / base / n_seeds;
    if (comm[a].empty()) {
      comm[a].resize(rounds + 1);
      comp[a].resize(rounds + 1);
      for (long k = 0; k <= rounds; ++k) {
        comm[a][k] = t.records[k].comm_steps;
        comp[a][k] = t.records[k].comp_steps;
      }
    }
    const double eps_abs = cfg.normalize ? cfg.epsilon * base : cfg.epsilon;
    if (auto cost = empirical_cost(t, eps_abs, CostMetric::opt_gap)) {
      mean_steps_to_eps[a] += cost->comm;
      reached[a] += 1;
    }
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "# " << resolved_config_json(cfg).dump() << "\n";
  csv << "round";
  for (const auto& r : resolved)
    csv << ',' << r.spec.name << "_residual," << r.spec.name << "_comm,"
        << r.spec.name << "_comp";
  csv << '\n';
  for (long k = 0; k <= rounds; ++k) {
    csv << k;
    for (std::size_t a = 0; a < resolved.size(); ++a)
      csv << ',' << residual[a][k] << ',' << comm[a][k] << ',' << comp[a][k];
    csv << '\n';
  }
  write_text_atomic(out / "compare.csv", csv.str());

  nlohmann::json summary{{"config", resolved_config_json(cfg)}};
  for (std::size_t a = 0; a < resolved.size(); ++a) {
    summary["algorithms"][resolved[a].spec.name] = {
        {"rho_bar", resolved[a].op.rho_bar},
        {"gamma", resolved[a].algo.gamma},
        {"final_residual", residual[a][rounds]},
        {"reached_fraction",
         static_cast<double>(reached[a]) / static_cast<double>(n_seeds)},
        {"mean_comm_to_epsilon",
         reached[a] > 0 ? nlohmann::json(mean_steps_to_eps[a] / reached[a])
                        : nlohmann::json()}};
  }
  write_text_atomic(out / "compare.json", summary.dump(2) + "\n");
  std::cout << "wrote compare.csv / compare.json to " << out.string() << "\n";
  return 0;
}

int cmd_pareto(const ExperimentConfig& cfg) {
  if (cfg.algorithms.empty())
    throw ConfigError("pareto needs one template algorithm entry");
  const Problem problem = make_problem(cfg);
  if (cfg.metric == CostMetric::opt_gap && !problem.optimum())
    throw ConfigError("pareto on opt_gap needs a problem with an optimum");
  const AlgoSpec base = cfg.algorithms.front();
  const fs::path out(cfg.out_dir);

  const Topology topo = build_topology(cfg.kind, cfg.n, cfg.degree);
  const MixingMatrix W = metropolis_weights(topo);

  struct Cell {
    int alpha, beta;
    double comm = 0.0, comp = 0.0;
    long reached = 0;
    double rho_bar = 0.0, gamma = 0.0;
  };
  std::vector<Cell> cells;
  for (int a = cfg.alpha_min; a <= cfg.alpha_max; ++a)
    for (int b = cfg.beta_min; b <= cfg.beta_max; ++b)
      cells.push_back({a, b});

  parallel_for(static_cast<long>(cells.size()), cfg.threads, [&](long i) {
    Cell& cell = cells[i];
    AlgoSpec spec = base;
    spec.alpha = cell.alpha;
    spec.beta = cell.beta;
    const MixingOperator op = make_operator(W, spec.protocol, spec.alpha);
    const AlgoConfig algo = resolve_algo(cfg, spec, problem, op);
    cell.rho_bar = op.rho_bar;
    cell.gamma = algo.gamma;
    for (auto seed : cfg.seeds) {
      Trajectory t = run(problem, algo, op, cfg.rounds, seed);
      double eps_abs = cfg.epsilon;
      if (cfg.normalize && cfg.metric == CostMetric::opt_gap)
        eps_abs *= t.records.front().opt_gap;
      if (auto cost = empirical_cost(t, eps_abs, cfg.metric)) {
        cell.comm += cost->comm;
        cell.comp += cost->comp;
        cell.reached += 1;
      }
    }
    if (cell.reached > 0) {
      cell.comm /= cell.reached;
      cell.comp /= cell.reached;
    }
  });

  std::vector<CostPoint> reachable;
  for (const auto& c : cells)
    if (c.reached > 0)
      reachable.push_back(
          {c.comm, c.comp, c.alpha, c.beta});
  std::vector<CostPoint> frontier;
  if (!reachable.empty()) frontier = pareto_frontier(reachable);
  auto on_frontier = [&](int a, int b) {
    for (const auto& f : frontier)
      if (f.alpha == a && f.beta == b) return true;
    return false;
  };

  std::ostringstream emp;
  emp.precision(17);
  emp << "# " << resolved_config_json(cfg).dump() << "\n";
  emp << "alpha,beta,comm,comp,pareto_flag,reach_fraction,rho_bar,gamma\n";
  for (const auto& c : cells) {
    const double frac =
        static_cast<double>(c.reached) / static_cast<double>(cfg.seeds.size());
    emp << c.alpha << ',' << c.beta << ','
        << (c.reached ? std::to_string(c.comm) : "nan") << ','
        << (c.reached ? std::to_string(c.comp) : "nan") << ','
        << (c.reached && on_frontier(c.alpha, c.beta) ? 1 : 0) << ',' << frac
        << ',' << c.rho_bar << ',' << c.gamma << '\n';
  }
  write_text_atomic(out / "pareto_empirical.csv", emp.str());

  // Analytic grid from the closed-form cost model, for side-by-side plots.
  std::vector<CostPoint> analytic;
  for (const auto& c : cells) {
    ComplexityQuery q;
    q.regime = problem.regime();
    q.L = problem.L();
    q.mu = problem.mu();
    q.sigma = problem.sigma();
    q.n = problem.n();
    q.rho_w = W.rho_w;
    q.epsilon = cfg.epsilon;
    q.alpha = c.alpha;
    q.beta = c.beta;
    q.protocol = base.protocol;
    analytic.push_back(table_costs(q));
  }
  const auto analytic_frontier = pareto_frontier(analytic);
  auto on_analytic = [&](int a, int b) {
    for (const auto& f : analytic_frontier)
      if (f.alpha == a && f.beta == b) return true;
    return false;
  };
  std::ostringstream ana;
  ana.precision(17);
  ana << "# " << resolved_config_json(cfg).dump() << "\n";
  ana << "alpha,beta,comm,comp,pareto_flag\n";
  for (const auto& c : analytic)
    ana << c.alpha << ',' << c.beta << ',' << c.comm << ',' << c.comp << ','
        << (on_analytic(c.alpha, c.beta) ? 1 : 0) << '\n';
  write_text_atomic(out / "pareto_analytic.csv", ana.str());

  // Overlap between the two frontiers (diagnostic only).
  long overlap = 0;
  for (const auto& f : frontier)
    if (on_analytic(f.alpha, f.beta)) ++overlap;
  nlohmann::json summary{
      {"config", resolved_config_json(cfg)},
      {"empirical_frontier_size", frontier.size()},
      {"analytic_frontier_size", analytic_frontier.size()},
      {"frontier_overlap", overlap},
      {"cells", cells.size()}};
  write_text_atomic(out / "pareto_summary.json", summary.dump(2) + "\n");
  std::cout << "wrote pareto grid (" << cells.size() << " cells) to "
            << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify suite
// ---------------------------------------------------------------------------

namespace {

Topology random_connected_topology(std::uint64_t seed, int index) {
  CounterRng rng(seed, static_cast<std::uint64_t>(index), 0, kSaltTopology);
  const int n = 4 + static_cast<int>(rng.next_u64() % 61);  // 4..64
  switch (index % 5) {
    case 0: return build_topology(GraphKind::ring, n);
    case 1: return build_topology(GraphKind::path, n);
    case 2: return build_topology(GraphKind::complete, std::min(n, 24));
    case 3: {
      int max_deg = 1;
      while ((1L << max_deg) < n && max_deg < 8) ++max_deg;
      const int degree = 1 + static_cast<int>(rng.next_u64() %
                                              static_cast<std::uint64_t>(max_deg));
      return build_topology(GraphKind::exponential, n, degree);
    }
    default: {
      // random spanning tree plus extra edges
      Topology t;
      t.n = n;
      std::vector<std::set<int>> adj(n);
      for (int i = 0; i < n; ++i) adj[i].insert(i);
      for (int v = 1; v < n; ++v) {
        const int u = static_cast<int>(rng.next_u64() %
                                       static_cast<std::uint64_t>(v));
        adj[u].insert(v);
        adj[v].insert(u);
      }
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.uniform() < 0.15) {
            adj[i].insert(j);
            adj[j].insert(i);
          }
      t.neighbors.resize(n);
      for (int i = 0; i < n; ++i)
        t.neighbors[i].assign(adj[i].begin(), adj[i].end());
      return t;
    }
  }
}

/// Independently coded single-rate gradient-tracking reference
/// (one local step, one mixing step per iteration).
std::vector<Eigen::MatrixXd> reference_dsgt(const Problem& problem,
                                            const Eigen::MatrixXd& W,
                                            double gamma, long iters,
                                            std::uint64_t seed) {
  const int n = problem.n();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, problem.p());
  Eigen::MatrixXd g_old = problem.stoch_grad_all(x, seed, 0);
  Eigen::MatrixXd y = g_old;
  std::vector<Eigen::MatrixXd> states;
  states.push_back(x);
  for (long t = 1; t <= iters; ++t) {
    const Eigen::MatrixXd g_new = problem.stoch_grad_all(x, seed, t);
    Eigen::MatrixXd x_half = x - gamma * y;
    Eigen::MatrixXd y_half = y + g_new - g_old;
    x = W * x_half;
    y = W * y_half;
    g_old = g_new;
    states.push_back(x);
  }
  return states;
}

struct Check {
  std::string name;
  bool pass = true;
  bool fatal = true;  // informational checks never fail the suite
  nlohmann::json detail;
};

}  // namespace

VerifyOutcome run_verify_suite(const ExperimentConfig& cfg) {
  std::vector<Check> checks;
  const std::uint64_t seed = cfg.problem_seed;

  // 1/2: mixing bounds over random connected topologies, alpha in [1, 10].
  {
    Check direct{"mixing_bound_direct"};
    Check acc{"mixing_bound_accelerated", true, false, {}};
    double worst_direct = std::numeric_limits<double>::infinity();
    double worst_acc = std::numeric_limits<double>::infinity();
    long acc_violations = 0;
    for (int i = 0; i < 50; ++i) {
      const Topology topo = random_connected_topology(seed, i);
      const MixingMatrix W = metropolis_weights(topo);
      for (int a = 1; a <= 10; ++a) {
        const auto op_d = make_operator(W, Protocol::direct, a);
        worst_direct = std::min(worst_direct, op_d.bound + 1e-12 - op_d.rho_bar);
        if (op_d.rho_bar > op_d.bound + 1e-12) direct.pass = false;
        const auto op_a = make_operator(W, Protocol::accelerated, a);
        worst_acc = std::min(worst_acc, op_a.bound + 1e-9 - op_a.rho_bar);
        if (op_a.bound_violated) ++acc_violations;
      }
    }
    direct.detail = {{"worst_margin", worst_direct}, {"cases", 500}};
    acc.pass = acc_violations == 0;
    acc.detail = {{"worst_margin", worst_acc},
                  {"violations", acc_violations},
                  {"cases", 500},
                  {"note",
                   "informational: the constant-momentum gossip recursion "
                   "overshoots its asymptotic envelope at small alpha"}};
    checks.push_back(std::move(direct));
    checks.push_back(std::move(acc));
  }

  // Shared fixtures for the dynamics checks.
  const Topology topo = build_topology(cfg.kind, cfg.n, cfg.degree);
  const MixingMatrix W = metropolis_weights(topo);
  const AlgoSpec base = cfg.algorithms.empty()
                            ? AlgoSpec{"flexgt_a2_b2", Method::flexgt,
                                       Protocol::direct, 2, 2, true, 0.0}
                            : cfg.algorithms.front();
  const MixingOperator op = make_operator(W, base.protocol, base.alpha);

  // 3: averaging preservation for both protocols.
  {
    Check c{"averaging_preservation"};
    double worst = 0.0;
    for (Protocol proto : {Protocol::direct, Protocol::accelerated}) {
      for (int a : {1, 3, 7}) {
        const auto o = make_operator(W, proto, a);
        const int n = static_cast<int>(o.matrix.rows());
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        worst = std::max(worst, (o.matrix * ones - ones).cwiseAbs().maxCoeff());
        worst = std::max(worst,
                         (o.matrix.transpose() * ones - ones).cwiseAbs().maxCoeff());
      }
    }
    c.pass = worst <= 1e-10;
    c.detail = {{"worst_residual", worst}, {"tolerance", 1e-10}};
    checks.push_back(std::move(c));
  }

  // 4: tracking identity along stochastic runs, inner-step granularity.
  {
    Check c{"tracking_identity"};
    double worst = 0.0;
    const Problem problem = make_problem(cfg);
    for (int rep = 0; rep < 4; ++rep) {
      AlgoConfig algo;
      algo.alpha = 1 + rep % 3;
      algo.beta = 1 + (rep + 1) % 4;
      algo.gamma = 0.5 * stepsize_rule(problem.regime(), problem.L(), algo.beta,
                                       op.rho_bar);
      const auto o = make_operator(W, Protocol::direct, algo.alpha);
      SwarmState s = init(problem, Eigen::VectorXd::Zero(problem.p()),
                          seed + rep);
      for (long k = 0; k < 100; ++k) {
        s.Z = s.X;
        for (int j = 0; j < algo.beta; ++j) {
          local_step(s, problem, algo);
          const double tol =
              1e-9 * std::max(1.0, s.Gprev.cwiseAbs().maxCoeff());
          worst = std::max(worst, tracking_residual(s) / tol);
        }
        comm_phase(s, o);
        const double tol = 1e-9 * std::max(1.0, s.Gprev.cwiseAbs().maxCoeff());
        worst = std::max(worst, tracking_residual(s) / tol);
      }
    }
    c.pass = worst <= 1.0;
    c.detail = {{"worst_ratio_to_tolerance", worst}};
    checks.push_back(std::move(c));
  }

  // 5: loop vs compact round equivalence.
  {
    Check c{"loop_compact_equivalence"};
    double worst = 0.0;
    const Problem problem = make_problem(cfg);
    for (int rep = 0; rep < 10; ++rep) {
      AlgoConfig algo;
      algo.alpha = 1 + rep % 4;
      algo.beta = 1 + rep % 5;
      algo.gamma = stepsize_rule(problem.regime(), problem.L(), algo.beta,
                                 op.rho_bar);
      const auto o = make_operator(W, rep % 2 ? Protocol::accelerated
                                              : Protocol::direct,
                                   algo.alpha);
      SwarmState a = init(problem, Eigen::VectorXd::Zero(problem.p()), seed + rep);
      SwarmState b = a;
      for (long k = 0; k < 25; ++k) {
        run_round(a, problem, algo, o);
        compact_round(b, problem, algo, o);
      }
      const double scale = std::max(1.0, a.X.cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.X - b.X).cwiseAbs().maxCoeff() / scale);
      worst = std::max(worst, (a.Y - b.Y).cwiseAbs().maxCoeff() /
                                  std::max(1.0, a.Y.cwiseAbs().maxCoeff()));
    }
    c.pass = worst <= 1e-12;
    c.detail = {{"worst_relative_difference", worst}, {"tolerance", 1e-12}};
    checks.push_back(std::move(c));
  }

  // 6: single-rate reduction against the independent reference.
  {
    Check c{"single_rate_reduction"};
    const Problem problem =
        Problem::ridge(std::min(cfg.n, 12), cfg.p, std::max(cfg.mu, 0.01), 0.1,
                       seed);
    const Topology t12 = build_topology(GraphKind::ring, problem.n());
    const MixingMatrix W12 = metropolis_weights(t12);
    const auto o = make_operator(W12, Protocol::direct, 1);
    AlgoConfig algo;
    algo.alpha = 1;
    algo.beta = 1;
    algo.gamma = 0.01;
    const auto ref = reference_dsgt(problem, W12.W, algo.gamma, 100, seed);
    SwarmState s = init(problem, Eigen::VectorXd::Zero(problem.p()), seed);
    double worst = 0.0;
    for (long k = 1; k <= 100; ++k) {
      run_round(s, problem, algo, o);
      worst = std::max(worst, (s.X - ref[k]).cwiseAbs().maxCoeff());
    }
    c.pass = worst == 0.0;
    c.detail = {{"max_abs_difference", worst}};
    checks.push_back(std::move(c));
  }

  // 7: centralized reduction with W = J and sigma = 0.
  {
    Check c{"centralized_reduction"};
    const Problem problem = Problem::ridge(8, cfg.p, 1.0, 0.0, seed);
    const int n = problem.n();
    MixingMatrix J{Eigen::MatrixXd::Constant(n, n, 1.0 / n), 0.0};
    const auto o = make_operator(J, Protocol::direct, 1);
    AlgoConfig algo;
    algo.alpha = 1;
    algo.beta = 3;
    algo.gamma = 0.05;
    SwarmState s = init(problem, Eigen::VectorXd::Zero(problem.p()), seed);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(problem.p());
    double worst = 0.0;
    for (long k = 0; k < 100; ++k) {
      run_round(s, problem, algo, o);
      // snapshot semantics: the tracked direction is frozen at the round start
      const Eigen::VectorXd g = problem.grad_avg(u);
      u -= algo.gamma * algo.beta * g;
      const Eigen::VectorXd xbar = s.X.colwise().mean().transpose();
      worst = std::max(worst,
                       (xbar - u).cwiseAbs().maxCoeff() /
                           std::max(1.0, u.cwiseAbs().maxCoeff()));
    }
    c.pass = worst <= 1e-12;
    c.detail = {{"worst_relative_difference", worst}, {"tolerance", 1e-12}};
    checks.push_back(std::move(c));
  }

  // 8-10: deterministic contraction checks at the configured stepsize scale.
  {
    const Problem det = Problem::ridge(cfg.n, cfg.p,
                                       cfg.family == "ridge" ? cfg.mu : 1.0,
                                       0.0, seed);
    AlgoConfig algo;
    algo.alpha = base.alpha;
    algo.beta = base.beta;
    algo.gamma = cfg.stepsize_scale *
                 stepsize_rule(det.regime(), det.L(), base.beta, op.rho_bar);

    TheoremParams tp;
    tp.mu = det.mu();
    tp.L = det.L();
    tp.gamma = algo.gamma;
    tp.beta = algo.beta;
    tp.rho_bar = op.rho_bar;
    tp.sigma = 0.0;
    tp.n = det.n();

    const long rounds = 300;
    const auto stats = run_with_lemma_stats(det, algo, op, rounds, seed,
                                            Eigen::VectorXd::Zero(det.p()));
    const auto lemma = check_lemma_contractions(stats, tp);
    Check c8{"lemma_contractions"};
    c8.pass = lemma.pass();
    c8.detail = lemma.to_json();
    for (auto& key : {"divergence", "consensus", "tracking"})
      c8.detail[key].erase("margins");
    checks.push_back(std::move(c8));

    const Trajectory traj = run(det, algo, op, rounds, seed);
    const auto sc = check_sc_contraction({traj}, tp);
    Check c9{"lyapunov_contraction"};
    c9.pass = sc.pass;
    c9.detail = sc.to_json();
    c9.detail.erase("margins");
    c9.detail["gamma"] = algo.gamma;
    c9.detail["stepsize_scale"] = cfg.stepsize_scale;
    checks.push_back(std::move(c9));

    Check c10{"lyapunov_monotone"};
    long viol = -1;
    const double V0 = traj.records.front().lyapunov;
    for (std::size_t k = 2; k < traj.records.size(); ++k) {
      const double prev = traj.records[k - 1].lyapunov;
      const double cur = traj.records[k].lyapunov;
      if (std::max(prev, cur) <= 1e-12 * V0) continue;
      if (cur > prev * (1.0 + 1e-13)) {
        viol = static_cast<long>(k);
        break;
      }
    }
    c10.pass = viol < 0;
    c10.detail = {{"first_increase", viol}};
    checks.push_back(std::move(c10));
  }

  VerifyOutcome out;
  out.report["version"] = kVersion;
  out.report["config"] = resolved_config_json(cfg);
  for (const auto& c : checks) {
    out.report["checks"][c.name] = c.detail;
    out.report["checks"][c.name]["pass"] = c.pass;
    out.report["checks"][c.name]["fatal"] = c.fatal;
    if (c.fatal && !c.pass) out.pass = false;
  }
  out.report["pass"] = out.pass;
  return out;
}

int cmd_verify(const ExperimentConfig& cfg) {
  const VerifyOutcome outcome = run_verify_suite(cfg);
  for (const auto& [name, detail] :
       outcome.report.at("checks").items()) {
    const bool pass = detail.at("pass").get<bool>();
    const bool fatal = detail.at("fatal").get<bool>();
    std::cout << (pass ? "[PASS] " : (fatal ? "[FAIL] " : "[WARN] ")) << name
              << "\n";
  }
  write_text_atomic(fs::path(cfg.out_dir) / "verify_report.json",
                    outcome.report.dump(2) + "\n");
  std::cout << (outcome.pass ? "verify: all checks passed"
                             : "verify: checks FAILED")
            << " (report in " << cfg.out_dir << "/verify_report.json)\n";
  return outcome.pass ? 0 : 2;
}

}  // namespace flexgt
