#include "flexgt/metrics.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace flexgt {

LyapunovCoeffs LyapunovCoeffs::make(double gamma, int beta, double L, int n,
                                    double rho_bar) {
  LyapunovCoeffs c;
  const double gb = gamma * beta;
  const double one_m = 1.0 - rho_bar;
  c.c_x = 16.0 * gb * L / (n * one_m);
  c.c_y = 256.0 * gb * gb * gb * L * rho_bar / (n * one_m * one_m * one_m);
  return c;
}

MetricRecord measure(const SwarmState& s, const Problem& problem,
                     const LyapunovCoeffs& coeffs) {
  MetricRecord r;
  r.round = s.round;
  r.comp_steps = s.comp_steps;
  r.comm_steps = s.comm_steps;

  const Eigen::RowVectorXd xbar = s.X.colwise().mean();
  const Eigen::RowVectorXd ybar = s.Y.colwise().mean();
  r.cons_err = (s.X.rowwise() - xbar).squaredNorm();
  r.track_err = (s.Y.rowwise() - ybar).squaredNorm();

  const Eigen::VectorXd xb = xbar.transpose();
  r.grad_norm_sq = problem.grad_avg(xb).squaredNorm();
  r.f_value = problem.value_avg(xb);

  if (const auto& xstar = problem.optimum()) {
    r.opt_gap = (xb - *xstar).squaredNorm();
    r.f_gap = r.f_value - problem.value_avg(*xstar);
    r.lyapunov = r.opt_gap + coeffs.c_x * r.cons_err + coeffs.c_y * r.track_err;
  }
  return r;
}

namespace {

void check_finite(const SwarmState& s) {
  if (!s.X.allFinite()) throw DivergenceError(s.round, "decision variables X");
  if (!s.Y.allFinite()) throw DivergenceError(s.round, "tracking variables Y");
}

}  // namespace

Trajectory run(const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op, long rounds, std::uint64_t seed,
               const Eigen::VectorXd& x0) {
  if (rounds < 1) throw std::invalid_argument("run needs rounds >= 1");
  Trajectory traj;
  traj.config = cfg;
  traj.seed = seed;
  traj.rho_bar = op.rho_bar;
  traj.has_optimum = problem.optimum().has_value();
  traj.problem_desc = problem.describe();
  traj.records.reserve(rounds + 1);

  const LyapunovCoeffs coeffs =
      LyapunovCoeffs::make(cfg.gamma, cfg.beta, problem.L(), problem.n(),
                           op.rho_bar);
  SwarmState s = init(problem, x0, seed);
  traj.records.push_back(measure(s, problem, coeffs));
  for (long k = 0; k < rounds; ++k) {
    step_round(s, problem, cfg, op);
    check_finite(s);
    traj.records.push_back(measure(s, problem, coeffs));
  }
  return traj;
}

Trajectory run(const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op, long rounds, std::uint64_t seed) {
  return run(problem, cfg, op, rounds, seed,
             Eigen::VectorXd::Zero(problem.p()));
}

std::vector<LemmaRoundStats> run_with_lemma_stats(const Problem& problem,
                                                  const AlgoConfig& cfg,
                                                  const MixingOperator& op,
                                                  long rounds,
                                                  std::uint64_t seed,
                                                  const Eigen::VectorXd& x0) {
  std::vector<LemmaRoundStats> stats;
  stats.reserve(rounds);
  SwarmState s = init(problem, x0, seed);
  for (long k = 0; k < rounds; ++k) {
    const Eigen::RowVectorXd xbar_prev = s.X.colwise().mean();
    const Eigen::RowVectorXd ybar_prev = s.Y.colwise().mean();
    LemmaRoundStats st;
    st.cons_prev = (s.X.rowwise() - xbar_prev).squaredNorm();
    st.track_prev = (s.Y.rowwise() - ybar_prev).squaredNorm();
    st.grad_sq_prev = problem.grad_avg(xbar_prev.transpose()).squaredNorm();

    step_round(s, problem, cfg, op);
    check_finite(s);

    st.divergence_sq = (s.X.rowwise() - xbar_prev).squaredNorm();
    const Eigen::RowVectorXd xbar_next = s.X.colwise().mean();
    const Eigen::RowVectorXd ybar_next = s.Y.colwise().mean();
    st.cons_next = (s.X.rowwise() - xbar_next).squaredNorm();
    st.track_next = (s.Y.rowwise() - ybar_next).squaredNorm();
    stats.push_back(st);
  }
  return stats;
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j{{"pass", pass},
                   {"first_violation", first_violation},
                   {"worst_margin", worst_margin},
                   {"rounds_checked", rounds_checked},
                   {"violations", violations}};
  j["margins"] = margins;
  return j;
}

CheckReport check_sc_contraction(const std::vector<Trajectory>& ensemble,
                                 const TheoremParams& p) {
  CheckReport rep;
  if (ensemble.empty()) return rep;
  const long rounds = static_cast<long>(ensemble.front().records.size()) - 1;
  const double factor =
      1.0 - std::min(p.mu * p.beta * p.gamma / 2.0, (1.0 - p.rho_bar) / 8.0);
  const double one_m = 1.0 - p.rho_bar;
  const double noise =
      p.gamma * p.gamma * p.beta * p.sigma * p.sigma / p.n +
      1664.0 * std::pow(p.gamma, 3) * std::pow(p.beta, 3) * p.L * p.rho_bar *
          p.sigma * p.sigma / (one_m * one_m * one_m);

  std::vector<double> V(rounds + 1, 0.0);
  for (const auto& traj : ensemble)
    for (long k = 0; k <= rounds; ++k) V[k] += traj.records[k].lyapunov;
  for (auto& v : V) v /= static_cast<double>(ensemble.size());

  const double V0 = V[0];
  rep.margins.reserve(rounds);
  for (long k = 0; k < rounds; ++k) {
    // Once V sits at the floating-point floor relative to V0 the recursion is
    // pure roundoff; those rounds are skipped.
    if (std::max(V[k], V[k + 1]) <= p.floor_rel * std::max(V0, 1e-300)) {
      rep.margins.push_back(0.0);
      continue;
    }
    const double rhs = p.slack * (factor * V[k] + noise);
    const double margin = rhs - V[k + 1];
    rep.margins.push_back(margin);
    rep.rounds_checked += 1;
    if (margin < rep.worst_margin) rep.worst_margin = margin;
    if (margin < -1e-13 * std::max({1.0, V0, V[k]})) {
      rep.violations += 1;
      if (rep.first_violation < 0) rep.first_violation = k;
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

namespace {

CheckReport check_running_average(const std::vector<Trajectory>& ensemble,
                                  const std::vector<long>& horizons,
                                  const std::function<double(const MetricRecord&)>& lhs_of,
                                  const std::function<double(long)>& rhs_of) {
  CheckReport rep;
  if (ensemble.empty()) return rep;
  const long rounds = static_cast<long>(ensemble.front().records.size()) - 1;
  std::vector<double> mean(rounds + 1, 0.0);
  for (const auto& traj : ensemble)
    for (long k = 0; k <= rounds; ++k) mean[k] += lhs_of(traj.records[k]);
  for (auto& v : mean) v /= static_cast<double>(ensemble.size());

  for (long K : horizons) {
    if (K < 1 || K > rounds)
      throw std::invalid_argument("check horizon exceeds trajectory length");
    double acc = 0.0;
    for (long k = 0; k < K; ++k) acc += mean[k];
    const double lhs = acc / static_cast<double>(K);
    const double margin = rhs_of(K) - lhs;
    rep.margins.push_back(margin);
    rep.rounds_checked += 1;
    if (margin < rep.worst_margin) rep.worst_margin = margin;
    if (margin < 0.0) {
      rep.violations += 1;
      if (rep.first_violation < 0) rep.first_violation = K;
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace

CheckReport check_convex_rate(const std::vector<Trajectory>& ensemble,
                              const TheoremParams& p,
                              const std::vector<long>& horizons, double E_V0) {
  const double one_m = 1.0 - p.rho_bar;
  const double gb = p.gamma * p.beta;
  const double s2 = p.sigma * p.sigma;
  const double noise = 2.0 * p.gamma * s2 / p.n +
                       3328.0 * gb * gb * p.L * p.rho_bar * s2 /
                           (one_m * one_m * one_m);
  return check_running_average(
      ensemble, horizons, [](const MetricRecord& r) { return r.f_gap; },
      [&](long K) {
        return p.slack * (2.0 * E_V0 / (gb * K) + noise);
      });
}

CheckReport check_nc_rate(const std::vector<Trajectory>& ensemble,
                          const TheoremParams& p,
                          const std::vector<long>& horizons, double E_f0_gap,
                          double E_track0) {
  const double one_m = 1.0 - p.rho_bar;
  const double gb = p.gamma * p.beta;
  const double s2 = p.sigma * p.sigma;
  const double noise = 4.0 * p.gamma * p.L * s2 / p.n +
                       3328.0 * gb * gb * p.L * p.L * p.rho_bar * s2 /
                           (one_m * one_m * one_m);
  return check_running_average(
      ensemble, horizons,
      [](const MetricRecord& r) { return r.grad_norm_sq; },
      [&](long K) {
        const double transient =
            8.0 * E_f0_gap / (gb * K) +
            8.0 * gb * gb * p.L * p.L * p.rho_bar * E_track0 /
                (p.n * one_m * one_m * one_m * K);
        return p.slack * (transient + noise);
      });
}

LemmaReport check_lemma_contractions(const std::vector<LemmaRoundStats>& stats,
                                     const TheoremParams& p) {
  LemmaReport rep;
  const double gb = p.gamma * p.beta;
  const double one_m = 1.0 - p.rho_bar;
  const double scale0 =
      stats.empty() ? 1.0
                    : std::max({1.0, stats.front().cons_prev,
                                stats.front().track_prev});

  auto add = [&](CheckReport& r, long k, double lhs, double rhs) {
    const double margin = rhs - lhs;
    r.margins.push_back(margin);
    r.rounds_checked += 1;
    if (margin < r.worst_margin) r.worst_margin = margin;
    if (margin < -1e-13 * std::max({scale0, lhs, rhs})) {
      r.violations += 1;
      if (r.first_violation < 0) r.first_violation = k;
    }
  };

  for (long k = 0; k < static_cast<long>(stats.size()); ++k) {
    const auto& st = stats[k];
    const double floor = p.floor_rel * scale0;
    if (std::max({st.cons_prev, st.cons_next, st.track_prev, st.track_next,
                  st.divergence_sq}) <= floor)
      continue;

    add(rep.divergence, k, st.divergence_sq,
        3.0 * st.cons_prev + 8.0 * gb * gb * st.track_prev +
            16.0 * p.n * gb * gb * st.grad_sq_prev);
    add(rep.consensus, k, st.cons_next,
        0.5 * (1.0 + p.rho_bar) * st.cons_prev +
            4.0 * gb * gb * p.rho_bar / one_m * st.track_prev);
    add(rep.tracking, k, st.track_next,
        0.25 * (3.0 + p.rho_bar) * st.track_prev +
            18.0 * p.rho_bar * p.L * p.L / one_m * st.cons_prev +
            96.0 * p.n * gb * gb * p.L * p.L * p.rho_bar / one_m *
                st.grad_sq_prev);
  }
  rep.divergence.pass = rep.divergence.violations == 0;
  rep.consensus.pass = rep.consensus.violations == 0;
  rep.tracking.pass = rep.tracking.violations == 0;
  return rep;
}

nlohmann::json LemmaReport::to_json() const {
  return nlohmann::json{{"divergence", divergence.to_json()},
                        {"consensus", consensus.to_json()},
                        {"tracking", tracking.to_json()},
                        {"pass", pass()}};
}

void to_json(nlohmann::json& j, const MetricRecord& r) {
  j = nlohmann::json{{"round", r.round},
                     {"cons_err", r.cons_err},
                     {"track_err", r.track_err},
                     {"grad_norm_sq", r.grad_norm_sq},
                     {"f_value", r.f_value},
                     {"comp_steps", r.comp_steps},
                     {"comm_steps", r.comm_steps}};
  if (std::isfinite(r.opt_gap)) j["opt_gap"] = r.opt_gap;
  if (std::isfinite(r.f_gap)) j["f_gap"] = r.f_gap;
  if (std::isfinite(r.lyapunov)) j["lyapunov"] = r.lyapunov;
}

void to_json(nlohmann::json& j, const Trajectory& t) {
  j = nlohmann::json{{"schema_version", 1},
                     {"seed", t.seed},
                     {"rho_bar", t.rho_bar},
                     {"has_optimum", t.has_optimum},
                     {"problem", t.problem_desc},
                     {"config",
                      {{"method", to_string(t.config.method)},
                       {"protocol", to_string(t.config.protocol)},
                       {"alpha", t.config.alpha},
                       {"beta", t.config.beta},
                       {"gamma", t.config.gamma}}},
                     {"records", t.records}};
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os.precision(17);
  nlohmann::json meta;
  to_json(meta, t);
  meta.erase("records");
  os << "# " << meta.dump() << "\n";
  os << "round,comp_steps,comm_steps,opt_gap,cons_err,track_err,lyapunov,"
        "grad_norm_sq,f_gap,f_value\n";
  for (const auto& r : t.records) {
    os << r.round << ',' << r.comp_steps << ',' << r.comm_steps << ','
       << r.opt_gap << ',' << r.cons_err << ',' << r.track_err << ','
       << r.lyapunov << ',' << r.grad_norm_sq << ',' << r.f_gap << ','
       << r.f_value << '\n';
  }
  return os.str();
}

}  // namespace flexgt
