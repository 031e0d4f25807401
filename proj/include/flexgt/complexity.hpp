#ifndef FLEXGT_COMPLEXITY_HPP
#define FLEXGT_COMPLEXITY_HPP

#include <optional>
#include <vector>

#include <json.hpp>

#include "flexgt/graph.hpp"
#include "flexgt/metrics.hpp"
#include "flexgt/problems.hpp"

namespace flexgt {

/// Inputs to the closed-form complexity model. All hidden constants in the
/// order-level expressions are set to 1 and logarithms are natural, so the
/// model reproduces shapes and orderings rather than absolute step counts.
struct ComplexityQuery {
  Regime regime = Regime::strongly_convex;
  double L = 1.0;
  double mu = 1.0;
  double sigma = 0.0;
  int n = 1;
  double rho_w = 0.0;
  double epsilon = 1e-3;
  int alpha = 1;
  int beta = 1;
  Protocol protocol = Protocol::direct;
  double V0 = 1.0;      // initial Lyapunov value (convex regimes)
  double f0_gap = 1.0;  // E[f(xbar_0) - f*] (nonconvex regime)
  double R0 = 0.0;      // (1/n) E||ytilde_0||^2 / E[f(xbar_0) - f*]
  // By default the effective gap entering the formulas is the protocol
  // envelope (rho_w^alpha or the accelerated envelope), capped at 1 - 1e-12.
  // Setting exact_rho_bar uses a measured operator gap instead.
  std::optional<double> exact_rho_bar;
};

/// Envelope value of rho_bar used by the table formulas, capped at 1 - 1e-12.
double effective_rho_bar(const ComplexityQuery& q);

/// Rounds needed to reach accuracy epsilon for the direct protocol:
///   SC:  L log(V0/e) / ((1-r)^2 mu) + s^2/(b mu^2 n e)
///        + sqrt(L r s^2) / (mu^{3/2} (1-r)^{3/2} e^{1/2})
///   Co:  [ L/((1-r)^2 e) + s^2/(b n e^2) + sqrt(L r s^2)/((1-r)^{3/2} e^{3/2}) ] V0
///   NC:  [ L/((1-r)^2 e) + R0/e + L s^2/(b n e^2)
///          + L sqrt(r s^2)/((1-r)^{3/2} e^{3/2}) ] f0_gap
/// For the accelerated protocol the alpha-tuned forms apply:
///   SC:  L log(V0/e)/mu + s^2/(n mu^2 b e)
///   Co:  [ sqrt(L)/e + L s^2/(n b e^2) ] V0
///   NC:  [ L/e + L s^2/(n b e^2) ] f0_gap
double iteration_complexity(const ComplexityQuery& q);

struct CostPoint {
  double comm = 0.0;
  double comp = 0.0;
  int alpha = 1;
  int beta = 1;
};

/// comm = alpha * K, comp = beta * K with K = iteration_complexity(q). For the
/// accelerated protocol alpha is chosen by select_alpha rather than taken from
/// the query.
CostPoint table_costs(const ComplexityQuery& q);

/// Communication steps per round that make the gossip error negligible:
///   SC:  ceil( max{ln 2, (1/2) ln(n b L / mu)} / sqrt(1 - sqrt(rho_w)) )
///   Co:  ceil( max{ln 2, (1/2) ln(n b)} / sqrt(1 - sqrt(rho_w)) )
///   NC:  ceil( max{ln 2, (1/2) ln(b max{n, R0})} / sqrt(1 - sqrt(rho_w)) )
int select_alpha(Regime regime, double rho_w, int n, int beta, double L,
                 double mu, double R0 = 0.0);

enum class CostMetric { opt_gap, f_gap_avg, grad_norm_avg };
CostMetric parse_cost_metric(std::string_view name);

/// Counters at the first round where the metric (or its running average for
/// the averaged metrics) falls to <= epsilon; nullopt if never reached.
std::optional<CostPoint> empirical_cost(const Trajectory& traj, double epsilon,
                                        CostMetric metric);

/// Points not dominated in the (comm, comp) plane. A point is dropped iff some
/// other point is <= in both coordinates and < in at least one. Exact ties are
/// kept. Output sorted by comm, then comp.
std::vector<CostPoint> pareto_frontier(std::vector<CostPoint> points);

void to_json(nlohmann::json& j, const CostPoint& c);

}  // namespace flexgt

#endif  // FLEXGT_COMPLEXITY_HPP
