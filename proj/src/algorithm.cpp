#include "flexgt/algorithm.hpp"

#include <cmath>
#include <limits>

#include "flexgt/rng.hpp"

namespace flexgt {

Method parse_method(std::string_view name) {
  if (name == "flexgt") return Method::flexgt;
  if (name == "dsgd") return Method::dsgd;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string to_string(Method m) {
  return m == Method::flexgt ? "flexgt" : "dsgd";
}

SwarmState init(const Problem& problem, const Eigen::VectorXd& x0,
                std::uint64_t seed) {
  SwarmState s;
  const int n = problem.n();
  s.X = x0.transpose().replicate(n, 1);
  s.Z = s.X;
  s.Gprev = problem.stoch_grad_all(s.Z, seed, 0);
  s.Y = s.Gprev;
  s.seed = seed;
  s.next_sample = 1;
  return s;
}

void local_step(SwarmState& s, const Problem& problem, const AlgoConfig& cfg) {
  const std::uint64_t t = s.next_sample++;
  const Eigen::MatrixXd g_new = problem.stoch_grad_all(s.Z, s.seed, t);
  s.X -= cfg.gamma * s.Y;
  s.Y += g_new - s.Gprev;
  s.Gprev = g_new;
  s.comp_steps += 1;
}

void local_phase(SwarmState& s, const Problem& problem, const AlgoConfig& cfg) {
  for (int j = 0; j < cfg.beta; ++j) local_step(s, problem, cfg);
}

void comm_phase(SwarmState& s, const MixingOperator& op) {
  if (op.matrix.cols() != s.X.rows())
    throw std::invalid_argument("mixing operator does not match state size");
  s.X = op.matrix * s.X;
  s.Y = op.matrix * s.Y;
  s.comm_steps += op.alpha;
}

namespace {

void snapshot_reset(SwarmState& s, const Problem& problem,
                    const AlgoConfig& cfg) {
  s.Z = s.X;
  if (cfg.boundary == BoundaryMode::resample) {
    // Redraw the retained gradient at the new snapshot. Breaks 1'Y = 1'Gprev;
    // kept only for comparing boundary conventions.
    s.Gprev = problem.stoch_grad_all(s.Z, s.seed, s.next_sample - 1,
                                     kSaltResample);
  }
}

}  // namespace

void run_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op) {
  snapshot_reset(s, problem, cfg);
  local_phase(s, problem, cfg);
  comm_phase(s, op);
  s.round += 1;
}

void compact_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                   const MixingOperator& op) {
  snapshot_reset(s, problem, cfg);
  const int beta = cfg.beta;

  // sum_{j=0}^{beta-1} Y_j = beta Y_0 + sum_{j=0}^{beta-2} G_j
  //                          - (beta-1) Gprev, with G_j drawn at the snapshot.
  Eigen::MatrixXd y_sum = static_cast<double>(beta) * s.Y;
  Eigen::MatrixXd g_last;
  for (int j = 0; j < beta; ++j) {
    const std::uint64_t t = s.next_sample++;
    Eigen::MatrixXd g = problem.stoch_grad_all(s.Z, s.seed, t);
    if (j < beta - 1) y_sum += g;
    if (j == beta - 1) g_last = std::move(g);
  }
  y_sum -= static_cast<double>(beta - 1) * s.Gprev;

  Eigen::MatrixXd x_inner = s.X - cfg.gamma * y_sum;
  Eigen::MatrixXd y_inner = s.Y + g_last - s.Gprev;
  s.X = op.matrix * x_inner;
  s.Y = op.matrix * y_inner;
  s.Gprev = std::move(g_last);
  s.comp_steps += beta;
  s.comm_steps += op.alpha;
  s.round += 1;
}

void dsgd_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                const MixingOperator& op) {
  for (int j = 0; j < cfg.beta; ++j) {
    const std::uint64_t t = s.next_sample++;
    const Eigen::MatrixXd g = problem.stoch_grad_all(s.X, s.seed, t);
    s.X -= cfg.gamma * g;
    s.comp_steps += 1;
  }
  s.X = op.matrix * s.X;
  s.comm_steps += op.alpha;
  s.round += 1;
}

void step_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                const MixingOperator& op) {
  if (cfg.method == Method::dsgd)
    dsgd_round(s, problem, cfg, op);
  else
    run_round(s, problem, cfg, op);
}

double tracking_residual(const SwarmState& s) {
  const Eigen::RowVectorXd r =
      s.Y.colwise().sum() - s.Gprev.colwise().sum();
  return r.cwiseAbs().maxCoeff();
}

double stepsize_rule(Regime regime, double L, int beta, double rho_bar) {
  if (L <= 0.0) throw std::invalid_argument("stepsize_rule needs L > 0");
  if (beta < 1) throw std::invalid_argument("stepsize_rule needs beta >= 1");
  if (rho_bar < 0.0 || rho_bar >= 1.0)
    throw std::invalid_argument("stepsize_rule needs 0 <= rho_bar < 1");
  const double bL = beta * L;
  const double first = regime == Regime::nonconvex
                           ? 1.0 / (4.0 * bL)
                           : 1.0 / (4.0 * std::sqrt(2.0) * bL);
  if (rho_bar == 0.0) return first;
  const double c2 = regime == Regime::nonconvex ? 14.0 : 18.0;
  const double second = (1.0 - rho_bar) / (c2 * bL * std::sqrt(rho_bar));
  const double third =
      (1.0 - rho_bar) * (1.0 - rho_bar) / (40.0 * bL * rho_bar);
  return std::min({first, second, third});
}

}  // namespace flexgt
