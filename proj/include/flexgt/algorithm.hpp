#ifndef FLEXGT_ALGORITHM_HPP
#define FLEXGT_ALGORITHM_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "flexgt/graph.hpp"
#include "flexgt/problems.hpp"

namespace flexgt {

enum class Method { flexgt, dsgd };
Method parse_method(std::string_view name);
std::string to_string(Method m);

/// Gradient pairing at round boundaries.
///
/// `stored` subtracts the retained previous sample (drawn at the old snapshot),
/// which preserves the tracking identity 1'Y = 1'Gprev exactly. `resample`
/// instead redraws the subtracted gradient at the fresh snapshot, breaking the
/// identity; it exists for comparison only.
enum class BoundaryMode { stored, resample };

struct AlgoConfig {
  Method method = Method::flexgt;
  Protocol protocol = Protocol::direct;
  int alpha = 1;
  int beta = 1;
  double gamma = 0.0;
  BoundaryMode boundary = BoundaryMode::stored;
};

/// Full algorithm state at a round boundary. Matrices are n x p with one row
/// per node.
struct SwarmState {
  Eigen::MatrixXd X;      // decision variables
  Eigen::MatrixXd Y;      // tracking variables
  Eigen::MatrixXd Z;      // snapshot points (frozen within a round)
  Eigen::MatrixXd Gprev;  // last stochastic gradients fed into Y
  long round = 0;
  long comp_steps = 0;    // cumulative gradient evaluations per node
  long comm_steps = 0;    // cumulative communication applications
  std::uint64_t seed = 0;
  std::uint64_t next_sample = 0;  // global sample counter (init consumed 0)
};

/// X = Z = 1 x0', Y = Gprev = one stochastic gradient per node at x0.
/// The tracking identity holds exactly by construction.
SwarmState init(const Problem& problem, const Eigen::VectorXd& x0,
                std::uint64_t seed);

/// One inner computation step: x -= gamma y, then y += g_new - g_prev with
/// g_new drawn at the current snapshot.
void local_step(SwarmState& s, const Problem& problem, const AlgoConfig& cfg);

/// beta local steps at the current snapshot; increments comp_steps by beta.
void local_phase(SwarmState& s, const Problem& problem, const AlgoConfig& cfg);

/// X <- Wbar X, Y <- Wbar Y; increments comm_steps by op.alpha.
void comm_phase(SwarmState& s, const MixingOperator& op);

/// Snapshot reset, local phase, communication phase.
void run_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
               const MixingOperator& op);

/// Independent implementation of one round in the summed compact form
///   X+ = Wbar (X - gamma sum_j Y_j),  Y+ = Wbar (Y + G_new - G_prev).
/// Consumes the same samples in the same order as run_round; used as an
/// equivalence oracle.
void compact_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                   const MixingOperator& op);

/// Baseline: beta local SGD steps at current iterates, then mixing.
void dsgd_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                const MixingOperator& op);

/// Dispatches on cfg.method.
void step_round(SwarmState& s, const Problem& problem, const AlgoConfig& cfg,
                const MixingOperator& op);

/// max column-sum residual ||1'Y - 1'Gprev||_inf of the tracking identity.
double tracking_residual(const SwarmState& s);

/// Largest constant stepsize covered by the convergence analysis:
///   (strongly) convex: min{ 1/(4 sqrt(2) bL), (1-r)/(18 bL sqrt(r)),
///                           (1-r)^2/(40 bL r) }
///   nonconvex:         min{ 1/(4 bL), (1-r)/(14 bL sqrt(r)),
///                           (1-r)^2/(40 bL r) }
/// with r = rho_bar; the r-dependent terms are inactive at r = 0.
double stepsize_rule(Regime regime, double L, int beta, double rho_bar);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long round, const std::string& quantity)
      : std::runtime_error("non-finite " + quantity + " at round " +
                           std::to_string(round)),
        round(round),
        quantity(quantity) {}
  long round;
  std::string quantity;
};

}  // namespace flexgt

#endif  // FLEXGT_ALGORITHM_HPP
