#include "flexgt/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexgt {

double effective_rho_bar(const ComplexityQuery& q) {
  if (q.exact_rho_bar) return std::min(*q.exact_rho_bar, 1.0 - 1e-12);
  return std::min(mixing_bound(q.protocol, q.rho_w, q.alpha), 1.0 - 1e-12);
}

namespace {

void validate(const ComplexityQuery& q) {
  if (q.epsilon <= 0.0)
    throw std::invalid_argument("complexity query needs epsilon > 0");
  if (q.L <= 0.0) throw std::invalid_argument("complexity query needs L > 0");
  if (q.n < 1) throw std::invalid_argument("complexity query needs n >= 1");
  if (q.alpha < 1 || q.beta < 1)
    throw std::invalid_argument("complexity query needs alpha, beta >= 1");
  if (q.rho_w < 0.0 || q.rho_w >= 1.0)
    throw std::invalid_argument("complexity query needs 0 <= rho_w < 1");
  if (q.regime == Regime::strongly_convex && q.mu <= 0.0)
    throw std::invalid_argument("strongly convex query needs mu > 0");
}

double direct_complexity(const ComplexityQuery& q) {
  const double r = effective_rho_bar(q);
  const double one_m = 1.0 - r;
  const double e = q.epsilon;
  const double s2 = q.sigma * q.sigma;
  switch (q.regime) {
    case Regime::strongly_convex: {
      const double t1 =
          q.L / (one_m * one_m * q.mu) * std::log(std::max(q.V0 / e, 1.0));
      const double t2 = s2 / (q.beta * q.mu * q.mu * q.n * e);
      const double t3 = std::sqrt(q.L * r * s2) /
                        (std::pow(q.mu, 1.5) * std::pow(one_m, 1.5) *
                         std::sqrt(e));
      return t1 + t2 + t3;
    }
    case Regime::convex: {
      const double t1 = q.L / (one_m * one_m * e);
      const double t2 = s2 / (q.beta * q.n * e * e);
      const double t3 =
          std::sqrt(q.L * r * s2) / (std::pow(one_m, 1.5) * std::pow(e, 1.5));
      return (t1 + t2 + t3) * q.V0;
    }
    case Regime::nonconvex: {
      const double t1 = q.L / (one_m * one_m * e);
      const double t2 = q.R0 / e;
      const double t3 = q.L * s2 / (q.beta * q.n * e * e);
      const double t4 =
          q.L * std::sqrt(r * s2) / (std::pow(one_m, 1.5) * std::pow(e, 1.5));
      return (t1 + t2 + t3 + t4) * q.f0_gap;
    }
  }
  throw std::logic_error("unreachable");
}

double accelerated_complexity(const ComplexityQuery& q) {
  const double e = q.epsilon;
  const double s2 = q.sigma * q.sigma;
  switch (q.regime) {
    case Regime::strongly_convex:
      return q.L / q.mu * std::log(std::max(q.V0 / e, 1.0)) +
             s2 / (q.n * q.mu * q.mu * q.beta * e);
    case Regime::convex:
      return (std::sqrt(q.L) / e + q.L * s2 / (q.n * q.beta * e * e)) * q.V0;
    case Regime::nonconvex:
      return (q.L / e + q.L * s2 / (q.n * q.beta * e * e)) * q.f0_gap;
  }
  throw std::logic_error("unreachable");
}

}  // namespace

double iteration_complexity(const ComplexityQuery& q) {
  validate(q);
  return q.protocol == Protocol::direct ? direct_complexity(q)
                                        : accelerated_complexity(q);
}

CostPoint table_costs(const ComplexityQuery& q) {
  validate(q);
  const double K = iteration_complexity(q);
  CostPoint c;
  c.beta = q.beta;
  c.alpha = q.protocol == Protocol::direct
                ? q.alpha
                : select_alpha(q.regime, q.rho_w, q.n, q.beta, q.L, q.mu, q.R0);
  c.comp = q.beta * K;
  c.comm = c.alpha * K;
  return c;
}

int select_alpha(Regime regime, double rho_w, int n, int beta, double L,
                 double mu, double R0) {
  if (rho_w < 0.0 || rho_w >= 1.0)
    throw std::invalid_argument("select_alpha needs 0 <= rho_w < 1");
  if (n < 1 || beta < 1 || L <= 0.0)
    throw std::invalid_argument("select_alpha needs n, beta >= 1 and L > 0");
  double arg = 0.0;
  switch (regime) {
    case Regime::strongly_convex:
      if (mu <= 0.0)
        throw std::invalid_argument("select_alpha (strongly convex) needs mu > 0");
      arg = static_cast<double>(n) * beta * L / mu;
      break;
    case Regime::convex:
      arg = static_cast<double>(n) * beta;
      break;
    case Regime::nonconvex:
      arg = beta * std::max(static_cast<double>(n), R0);
      break;
  }
  const double numer = std::max(std::log(2.0), 0.5 * std::log(arg));
  const double denom = std::sqrt(1.0 - std::sqrt(rho_w));
  return std::max(1, static_cast<int>(std::ceil(numer / denom)));
}

CostMetric parse_cost_metric(std::string_view name) {
  if (name == "opt_gap") return CostMetric::opt_gap;
  if (name == "f_gap_avg") return CostMetric::f_gap_avg;
  if (name == "grad_norm_avg") return CostMetric::grad_norm_avg;
  throw std::invalid_argument("unknown cost metric: " + std::string(name));
}

std::optional<CostPoint> empirical_cost(const Trajectory& traj, double epsilon,
                                        CostMetric metric) {
  double running = 0.0;
  long count = 0;
  for (const auto& r : traj.records) {
    double value = 0.0;
    switch (metric) {
      case CostMetric::opt_gap:
        value = r.opt_gap;
        break;
      case CostMetric::f_gap_avg:
        running += r.f_gap;
        ++count;
        value = running / count;
        break;
      case CostMetric::grad_norm_avg:
        running += r.grad_norm_sq;
        ++count;
        value = running / count;
        break;
    }
    if (std::isnan(value))
      throw std::invalid_argument("trajectory lacks the requested metric");
    if (value <= epsilon)
      return CostPoint{static_cast<double>(r.comm_steps),
                       static_cast<double>(r.comp_steps), traj.config.alpha,
                       traj.config.beta};
  }
  return std::nullopt;
}

std::vector<CostPoint> pareto_frontier(std::vector<CostPoint> points) {
  if (points.empty())
    throw std::invalid_argument("pareto_frontier needs a non-empty list");
  std::vector<CostPoint> kept;
  kept.reserve(points.size());
  for (const auto& c : points) {
    bool dominated = false;
    for (const auto& other : points) {
      if (other.comm <= c.comm && other.comp <= c.comp &&
          (other.comm < c.comm || other.comp < c.comp)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const CostPoint& a, const CostPoint& b) {
    if (a.comm != b.comm) return a.comm < b.comm;
    if (a.comp != b.comp) return a.comp < b.comp;
    return std::pair(a.alpha, a.beta) < std::pair(b.alpha, b.beta);
  });
  return kept;
}

void to_json(nlohmann::json& j, const CostPoint& c) {
  j = nlohmann::json{{"comm", c.comm},
                     {"comp", c.comp},
                     {"alpha", c.alpha},
                     {"beta", c.beta}};
}

}  // namespace flexgt
