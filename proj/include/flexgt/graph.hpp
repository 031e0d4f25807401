#ifndef FLEXGT_GRAPH_HPP
#define FLEXGT_GRAPH_HPP

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace flexgt {

enum class GraphKind { ring, path, complete, exponential };
enum class Protocol { direct, accelerated };

GraphKind parse_graph_kind(std::string_view name);
Protocol parse_protocol(std::string_view name);
std::string to_string(GraphKind k);
std::string to_string(Protocol p);

/// Undirected network topology with self-loops. Neighbor lists are sorted and
/// always contain the node itself.
struct Topology {
  int n = 0;
  std::vector<std::vector<int>> neighbors;

  /// Degree excluding the self-loop.
  int degree(int i) const { return static_cast<int>(neighbors[i].size()) - 1; }
  bool adjacent(int i, int j) const;
  bool symmetric() const;
  bool connected() const;  // breadth-first search from node 0
};

/// Builds one of the supported topology families.
///
/// The exponential family links node i to nodes at offsets 1, 2, 4, ...,
/// 2^(degree-1) modulo n and then symmetrizes, so the realized neighbor count
/// can exceed `degree`. `degree` is ignored for the other families.
Topology build_topology(GraphKind kind, int n, int degree = 0);

/// Doubly stochastic weight matrix together with its squared spectral gap
/// rho_w = ||W - J||_2^2.
struct MixingMatrix {
  Eigen::MatrixXd W;
  double rho_w = 0.0;
};

/// Metropolis-Hastings weights: W_ij = 1/(1 + max(d_i, d_j)) for adjacent
/// i != j and W_ii = 1 - sum_j W_ij. Symmetric, hence doubly stochastic.
MixingMatrix metropolis_weights(const Topology& topo);

/// ||W - J||_2^2, the squared largest singular value of W - J.
/// Dense eigendecomposition up to n = 512, power iteration beyond.
double spectral_gap(const Eigen::MatrixXd& W);

/// Power-iteration estimate of ||W - J||_2^2 (cross-check path).
double spectral_gap_power(const Eigen::MatrixXd& W, double tol = 1e-12,
                          int max_iters = 10000);

/// Per-round communication map: either W^alpha (direct) or the accelerated
/// gossip polynomial M_alpha with momentum eta.
struct MixingOperator {
  Eigen::MatrixXd matrix;  // Wbar
  Protocol protocol = Protocol::direct;
  int alpha = 1;
  double rho_bar = 0.0;      // exact ||Wbar - J||^2
  double eta = 0.0;          // momentum weight, zero for direct
  double rho_w = 0.0;        // gap of the one-step matrix
  double bound = 0.0;        // contraction envelope for this protocol/alpha
  bool bound_violated = false;
  std::string diagnostic;
};

/// Envelope on rho_bar: rho_w^alpha for the direct protocol and
/// 2 (1 - sqrt(1 - sqrt(rho_w)))^(2 alpha) for accelerated gossip.
double mixing_bound(Protocol protocol, double rho_w, int alpha);

/// Builds the cached per-round operator. Momentum resets every round, so the
/// alpha gossip steps fold into a single matrix. The exact rho_bar is stored;
/// when it exceeds the envelope by more than 1e-9 the operator carries a
/// diagnostic message (the accelerated recursion overshoots its asymptotic
/// envelope for moderate alpha, notably on near-bipartite graphs).
MixingOperator make_operator(const MixingMatrix& W, Protocol protocol,
                             int alpha);

void to_json(nlohmann::json& j, const Topology& t);
void from_json(const nlohmann::json& j, Topology& t);
void to_json(nlohmann::json& j, const MixingMatrix& m);
void from_json(const nlohmann::json& j, MixingMatrix& m);
void to_json(nlohmann::json& j, const MixingOperator& op);

}  // namespace flexgt

#endif  // FLEXGT_GRAPH_HPP
