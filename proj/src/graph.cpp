#include "flexgt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace flexgt {

GraphKind parse_graph_kind(std::string_view name) {
  if (name == "ring") return GraphKind::ring;
  if (name == "path") return GraphKind::path;
  if (name == "complete") return GraphKind::complete;
  if (name == "exponential") return GraphKind::exponential;
  throw std::invalid_argument("unknown topology kind: " + std::string(name));
}

Protocol parse_protocol(std::string_view name) {
  if (name == "direct") return Protocol::direct;
  if (name == "accelerated") return Protocol::accelerated;
  throw std::invalid_argument("unknown protocol: " + std::string(name));
}

std::string to_string(GraphKind k) {
  switch (k) {
    case GraphKind::ring: return "ring";
    case GraphKind::path: return "path";
    case GraphKind::complete: return "complete";
    case GraphKind::exponential: return "exponential";
  }
  return "?";
}

std::string to_string(Protocol p) {
  return p == Protocol::direct ? "direct" : "accelerated";
}

bool Topology::adjacent(int i, int j) const {
  const auto& ni = neighbors[i];
  return std::binary_search(ni.begin(), ni.end(), j);
}

bool Topology::symmetric() const {
  for (int i = 0; i < n; ++i)
    for (int j : neighbors[i])
      if (!adjacent(j, i)) return false;
  return true;
}

bool Topology::connected() const {
  if (n <= 1) return true;
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : neighbors[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

Topology build_topology(GraphKind kind, int n, int degree) {
  if (n < 1) throw std::invalid_argument("topology needs n >= 1");
  std::vector<std::set<int>> adj(n);
  for (int i = 0; i < n; ++i) adj[i].insert(i);

  auto link = [&](int i, int j) {
    adj[i].insert(j);
    adj[j].insert(i);
  };

  switch (kind) {
    case GraphKind::ring:
      for (int i = 0; i < n; ++i) link(i, (i + 1) % n);
      break;
    case GraphKind::path:
      for (int i = 0; i + 1 < n; ++i) link(i, i + 1);
      break;
    case GraphKind::complete:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) link(i, j);
      break;
    case GraphKind::exponential: {
      if (degree < 1)
        throw std::invalid_argument("exponential topology needs degree >= 1");
      if (degree > n - 1 && n > 1)
        throw std::invalid_argument("degree exceeds n - 1");
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < degree; ++k) {
          long off = 1L << k;
          link(i, static_cast<int>((i + off) % n));
        }
      break;
    }
  }

  Topology t;
  t.n = n;
  t.neighbors.resize(n);
  for (int i = 0; i < n; ++i)
    t.neighbors[i].assign(adj[i].begin(), adj[i].end());
  return t;
}

MixingMatrix metropolis_weights(const Topology& topo) {
  const int n = topo.n;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : topo.neighbors[i]) {
      if (j == i) continue;
      W(i, j) = 1.0 / (1.0 + std::max(topo.degree(i), topo.degree(j)));
      off += W(i, j);
    }
    W(i, i) = 1.0 - off;
  }
  return MixingMatrix{W, spectral_gap(W)};
}

namespace {

// Largest eigenvalue of the symmetric PSD matrix A'A via power iteration.
double largest_sq_singular_power(const Eigen::MatrixXd& A, double tol,
                                 int max_iters) {
  const Eigen::MatrixXd S = A.transpose() * A;
  const int n = static_cast<int>(S.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  // deterministic perturbation so v is not orthogonal to the top eigenvector
  for (int i = 0; i < n; ++i) v[i] += 1e-3 * std::sin(1.0 + i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = S * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = w.dot(S * w);
    const bool converged = std::abs(next - lambda) <= tol * std::max(1.0, next);
    lambda = next;
    v = w;
    if (converged && it > 2) break;
  }
  return std::max(lambda, 0.0);
}

}  // namespace

double spectral_gap_power(const Eigen::MatrixXd& W, double tol, int max_iters) {
  if (W.rows() != W.cols())
    throw std::invalid_argument("spectral_gap needs a square matrix");
  const int n = static_cast<int>(W.rows());
  const Eigen::MatrixXd A =
      W - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  return largest_sq_singular_power(A, tol, max_iters);
}

double spectral_gap(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols())
    throw std::invalid_argument("spectral_gap needs a square matrix");
  const int n = static_cast<int>(W.rows());
  const Eigen::MatrixXd A =
      W - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  if (n <= 512) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A,
                                                      Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues().maxCoeff(), 0.0);
  }
  return largest_sq_singular_power(A, 1e-12, 10000);
}

double mixing_bound(Protocol protocol, double rho_w, int alpha) {
  if (protocol == Protocol::direct) return std::pow(rho_w, alpha);
  const double rate = 1.0 - std::sqrt(1.0 - std::sqrt(rho_w));
  return 2.0 * std::pow(rate, 2 * alpha);
}

MixingOperator make_operator(const MixingMatrix& W, Protocol protocol,
                             int alpha) {
  if (alpha < 1) throw std::invalid_argument("make_operator needs alpha >= 1");
  const int n = static_cast<int>(W.W.rows());

  MixingOperator op;
  op.protocol = protocol;
  op.alpha = alpha;
  op.rho_w = W.rho_w;

  if (protocol == Protocol::direct) {
    Eigen::MatrixXd M = W.W;
    for (int s = 1; s < alpha; ++s) M = W.W * M;
    op.matrix = std::move(M);
    op.eta = 0.0;
  } else {
    // eta = 0 when the matrix already averages perfectly (rho_w = 0); the
    // recursion then degenerates to the direct product.
    const double eta =
        W.rho_w > 0.0
            ? (1.0 - std::sqrt(1.0 - W.rho_w)) / (1.0 + std::sqrt(1.0 - W.rho_w))
            : 0.0;
    Eigen::MatrixXd Mprev = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Mcur = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < alpha; ++s) {
      Eigen::MatrixXd Mnext = (1.0 + eta) * (W.W * Mcur) - eta * Mprev;
      Mprev = std::move(Mcur);
      Mcur = std::move(Mnext);
    }
    op.matrix = std::move(Mcur);
    op.eta = eta;
  }

  op.rho_bar = spectral_gap(op.matrix);
  op.bound = mixing_bound(protocol, W.rho_w, alpha);
  op.bound_violated = op.rho_bar > op.bound + 1e-9;
  if (op.bound_violated) {
    op.diagnostic = "rho_bar " + std::to_string(op.rho_bar) +
                    " exceeds contraction envelope " + std::to_string(op.bound) +
                    " (" + to_string(protocol) +
                    ", alpha=" + std::to_string(alpha) +
                    "); the constant-momentum recursion overshoots its "
                    "asymptotic envelope at small step counts";
  }
  return op;
}

void to_json(nlohmann::json& j, const Topology& t) {
  j = nlohmann::json{{"n", t.n}, {"neighbors", t.neighbors}};
}

void from_json(const nlohmann::json& j, Topology& t) {
  j.at("n").get_to(t.n);
  j.at("neighbors").get_to(t.neighbors);
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  std::vector<double> data(M.size());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      data[static_cast<std::size_t>(i) * M.cols() + j] = M(i, j);
  return nlohmann::json{{"rows", M.rows()}, {"cols", M.cols()},
                        {"data", data}};  // row-major
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const long rows = j.at("rows").get<long>();
  const long cols = j.at("cols").get<long>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<long>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix json has wrong element count");
  Eigen::MatrixXd M(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long k = 0; k < cols; ++k)
      M(i, k) = data[static_cast<std::size_t>(i) * cols + k];
  return M;
}

}  // namespace

void to_json(nlohmann::json& j, const MixingMatrix& m) {
  j = nlohmann::json{{"W", matrix_to_json(m.W)}, {"rho_w", m.rho_w}};
}

void from_json(const nlohmann::json& j, MixingMatrix& m) {
  m.W = matrix_from_json(j.at("W"));
  j.at("rho_w").get_to(m.rho_w);
}

void to_json(nlohmann::json& j, const MixingOperator& op) {
  j = nlohmann::json{{"matrix", matrix_to_json(op.matrix)},
                     {"protocol", to_string(op.protocol)},
                     {"alpha", op.alpha},
                     {"rho_bar", op.rho_bar},
                     {"eta", op.eta},
                     {"rho_w", op.rho_w},
                     {"bound", op.bound},
                     {"bound_violated", op.bound_violated}};
  if (!op.diagnostic.empty()) j["diagnostic"] = op.diagnostic;
}

}  // namespace flexgt
