#ifndef FLEXGT_METRICS_HPP
#define FLEXGT_METRICS_HPP

#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "flexgt/algorithm.hpp"

namespace flexgt {

/// Per-round diagnostics. Fields that need the optimum (opt_gap, f_gap,
/// lyapunov) are NaN when no closed-form optimum exists.
struct MetricRecord {
  long round = 0;
  double opt_gap = std::numeric_limits<double>::quiet_NaN();   // ||xbar - x*||^2
  double cons_err = 0.0;                                       // ||X - 1 xbar'||^2
  double track_err = 0.0;                                      // ||Y - 1 ybar'||^2
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double grad_norm_sq = 0.0;                                   // ||grad f(xbar)||^2
  double f_gap = std::numeric_limits<double>::quiet_NaN();     // f(xbar) - f(x*)
  double f_value = 0.0;                                        // f(xbar)
  long comp_steps = 0;
  long comm_steps = 0;
};

/// Weights of the consensus and tracking errors in the Lyapunov function
///   V = ||xbar - x*||^2 + c_x ||xtilde||^2 + c_y ||ytilde||^2.
struct LyapunovCoeffs {
  double c_x = 0.0;
  double c_y = 0.0;

  /// c_x = 16 g b L / (n (1-r)), c_y = 256 g^3 b^3 L r / (n (1-r)^3).
  static LyapunovCoeffs make(double gamma, int beta, double L, int n,
                             double rho_bar);
};

MetricRecord measure(const SwarmState& s, const Problem& problem,
                     const LyapunovCoeffs& coeffs);

struct Trajectory {
  std::vector<MetricRecord> records;
  AlgoConfig config;
  std::uint64_t seed = 0;
  double rho_bar = 0.0;
  bool has_optimum = false;
  nlohmann::json problem_desc;
};

/// Runs init plus K rounds, recording a MetricRecord at every round boundary
/// (K+1 records). Deterministic given the seed. Aborts with DivergenceError on
/// non-finite state.
Trajectory run(const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op, long rounds, std::uint64_t seed,
               const Eigen::VectorXd& x0);

Trajectory run(const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op, long rounds, std::uint64_t seed);

/// Per-round quantities needed by the contraction inequalities; captured while
/// stepping because they relate consecutive round boundaries.
struct LemmaRoundStats {
  double cons_prev = 0.0, cons_next = 0.0;
  double track_prev = 0.0, track_next = 0.0;
  double grad_sq_prev = 0.0;      // ||grad f(xbar_k)||^2
  double divergence_sq = 0.0;     // ||X_{k+1} - 1 xbar_k'||^2
};

std::vector<LemmaRoundStats> run_with_lemma_stats(const Problem& problem,
                                                  const AlgoConfig& cfg,
                                                  const MixingOperator& op,
                                                  long rounds,
                                                  std::uint64_t seed,
                                                  const Eigen::VectorXd& x0);

struct TheoremParams {
  double mu = 0.0;
  double L = 0.0;
  double gamma = 0.0;
  int beta = 1;
  double rho_bar = 0.0;
  double sigma = 0.0;
  int n = 1;
  double slack = 1.0;          // multiplicative slack on the bound (ensembles)
  double floor_rel = 1e-12;    // skip rounds once V sits at the numerical floor
};

struct CheckReport {
  bool pass = true;
  long first_violation = -1;
  double worst_margin = std::numeric_limits<double>::infinity();
  long rounds_checked = 0;
  long violations = 0;
  std::vector<double> margins;
  nlohmann::json to_json() const;
};

/// Linear contraction of the Lyapunov function:
///   E V_{k+1} <= (1 - min{mu b g / 2, (1-r)/8}) E V_k
///                + g^2 b s^2 / n + 1664 g^3 b^3 L r s^2 / (1-r)^3.
/// With one trajectory and sigma = 0 the check is exact per round; with an
/// ensemble the left side is the seed average and `slack` should be > 1.
CheckReport check_sc_contraction(const std::vector<Trajectory>& ensemble,
                                 const TheoremParams& p);

/// Sublinear rate for convex objectives: the running average of E[f - f*] up
/// to round K is compared against
///   2 E V_0 / (g b K) + 2 g s^2 / n + 3328 g^2 b^2 L r s^2 / (1-r)^3.
CheckReport check_convex_rate(const std::vector<Trajectory>& ensemble,
                              const TheoremParams& p,
                              const std::vector<long>& horizons,
                              double E_V0);

/// Nonconvex rate: running average of E||grad f(xbar)||^2 against
///   8 E[f_0 - f*]/(g b K) + 8 g^2 b^2 L^2 r E||yt_0||^2 / (n (1-r)^3 K)
///   + 4 g L s^2 / n + 3328 g^2 b^2 L^2 r s^2 / (1-r)^3.
CheckReport check_nc_rate(const std::vector<Trajectory>& ensemble,
                          const TheoremParams& p,
                          const std::vector<long>& horizons, double E_f0_gap,
                          double E_track0);

struct LemmaReport {
  CheckReport divergence;  // client divergence bound
  CheckReport consensus;   // consensus error contraction
  CheckReport tracking;    // tracking error contraction
  bool pass() const {
    return divergence.pass && consensus.pass && tracking.pass;
  }
  nlohmann::json to_json() const;
};

/// Deterministic (sigma = 0) per-round checks of the three state inequalities:
///   ||X_{k+1} - 1 xbar_k'||^2 <= 3 xt + 8 g^2 b^2 yt + 16 n g^2 b^2 gsq
///   xt_{k+1} <= (1+r)/2 xt + 4 g^2 b^2 r/(1-r) yt
///   yt_{k+1} <= (3+r)/4 yt + 18 r L^2/(1-r) xt + 96 n g^2 b^2 L^2 r/(1-r) gsq
LemmaReport check_lemma_contractions(const std::vector<LemmaRoundStats>& stats,
                                     const TheoremParams& p);

void to_json(nlohmann::json& j, const MetricRecord& r);
void to_json(nlohmann::json& j, const Trajectory& t);

/// CSV with one row per round; the resolved config is embedded as a leading
/// comment line.
std::string trajectory_csv(const Trajectory& t);

}  // namespace flexgt

#endif  // FLEXGT_METRICS_HPP
