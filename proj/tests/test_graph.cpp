#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <queue>
#include <set>

#include <Eigen/Eigenvalues>

#include "flexgt/graph.hpp"
#include "flexgt/rng.hpp"

using namespace flexgt;

namespace {

// Independent reachability oracle.
int bfs_component_size(const Topology& t) {
  std::vector<bool> seen(t.n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : t.neighbors[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
  }
  return count;
}

Topology random_topology(std::uint64_t seed, int index) {
  CounterRng rng(seed, index, 0, kSaltTopology);
  const int n = 4 + static_cast<int>(rng.next_u64() % 29);
  switch (index % 4) {
    case 0: return build_topology(GraphKind::ring, n);
    case 1: return build_topology(GraphKind::path, n);
    case 2: return build_topology(GraphKind::complete, n);
    default: {
      int max_deg = 1;
      while ((1 << max_deg) < n && max_deg < 6) ++max_deg;
      const int deg = 1 + static_cast<int>(rng.next_u64() % max_deg);
      return build_topology(GraphKind::exponential, n, deg);
    }
  }
}

}  // namespace

TEST_CASE("complete n=2 has mutual adjacency plus self loops") {
  const Topology t = build_topology(GraphKind::complete, 2);
  CHECK(t.n == 2);
  CHECK(t.neighbors[0] == std::vector<int>{0, 1});
  CHECK(t.neighbors[1] == std::vector<int>{0, 1});
}

TEST_CASE("ring n=4 links cyclic neighbors and self") {
  const Topology t = build_topology(GraphKind::ring, 4);
  CHECK(t.neighbors[0] == std::vector<int>{0, 1, 3});
  CHECK(t.neighbors[2] == std::vector<int>{1, 2, 3});
  CHECK(t.symmetric());
  CHECK(t.connected());
}

TEST_CASE("exponential n=20 degree=5 uses power-of-two offsets, symmetrized") {
  const Topology t = build_topology(GraphKind::exponential, 20, 5);
  const std::set<int> offsets{1, 2, 4, 8, 16};
  for (int i = 0; i < 20; ++i) {
    std::set<int> expected{i};
    for (int off : offsets) {
      expected.insert((i + off) % 20);
      expected.insert(((i - off) % 20 + 20) % 20);
    }
    CHECK(std::vector<int>(expected.begin(), expected.end()) == t.neighbors[i]);
  }
  CHECK(t.symmetric());
  CHECK(bfs_component_size(t) == 20);
}

TEST_CASE("topology construction rejects bad arguments") {
  CHECK_THROWS_AS(build_topology(GraphKind::ring, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_topology(GraphKind::exponential, 8, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_topology(GraphKind::exponential, 4, 4),
                  std::invalid_argument);
}

TEST_CASE("all families are symmetric, connected, self-looped") {
  for (int i = 0; i < 24; ++i) {
    const Topology t = random_topology(99, i);
    CHECK(t.symmetric());
    CHECK(bfs_component_size(t) == t.n);
    for (int v = 0; v < t.n; ++v) CHECK(t.adjacent(v, v));
  }
}

TEST_CASE("metropolis weights on complete n=2 give the averaging matrix") {
  const auto mm = metropolis_weights(build_topology(GraphKind::complete, 2));
  CHECK(mm.W(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mm.W(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mm.rho_w == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("metropolis weights on ring n=3 are uniform thirds") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(mm.W(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(mm.rho_w < 1e-14);
}

TEST_CASE("metropolis weights are doubly stochastic and sparsity-respecting") {
  for (int i = 0; i < 24; ++i) {
    const Topology t = random_topology(7, i);
    const auto mm = metropolis_weights(t);
    for (int r = 0; r < t.n; ++r) {
      CHECK(std::abs(mm.W.row(r).sum() - 1.0) <= 1e-12);
      CHECK(std::abs(mm.W.col(r).sum() - 1.0) <= 1e-12);
      for (int c = 0; c < t.n; ++c)
        if (!t.adjacent(r, c)) CHECK(mm.W(r, c) == 0.0);
    }
    if (t.n >= 2) {
      CHECK(mm.rho_w > 0.0);
      CHECK(mm.rho_w < 1.0);
    }
  }
}

TEST_CASE("metropolis ring n=20 gap matches a direct eigenvalue oracle") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 20));
  // W is symmetric, so ||W - J||_2 is the largest |eigenvalue| of W - J.
  Eigen::MatrixXd A = mm.W - Eigen::MatrixXd::Constant(20, 20, 1.0 / 20);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(mm.rho_w == doctest::Approx(lmax * lmax).epsilon(1e-12));
  CHECK(mm.rho_w > 0.0);
  CHECK(mm.rho_w < 1.0);
}

TEST_CASE("spectral gap of J is zero and of I (n=2) is one") {
  CHECK(spectral_gap(Eigen::MatrixXd::Constant(4, 4, 0.25)) ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(spectral_gap(Eigen::MatrixXd::Identity(2, 2)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(spectral_gap(Eigen::MatrixXd::Zero(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("power iteration agrees with the eigendecomposition path") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 20));
  const double a = spectral_gap(mm.W);
  const double b = spectral_gap_power(mm.W);
  CHECK(std::abs(a - b) <= 1e-10);
}

TEST_CASE("direct operator with alpha=1 is the matrix itself") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 8));
  const auto op = make_operator(mm, Protocol::direct, 1);
  CHECK((op.matrix - mm.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.rho_bar == doctest::Approx(mm.rho_w).epsilon(1e-14));
  CHECK(op.eta == 0.0);
  CHECK_FALSE(op.bound_violated);
}

TEST_CASE("accelerated operator on the averaging matrix degenerates") {
  const int n = 6;
  MixingMatrix J{Eigen::MatrixXd::Constant(n, n, 1.0 / n), 0.0};
  const auto op = make_operator(J, Protocol::accelerated, 3);
  CHECK(op.eta == 0.0);
  CHECK((op.matrix - J.W).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(op.rho_bar <= 1e-13);
}

TEST_CASE("make_operator rejects alpha < 1") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 5));
  CHECK_THROWS_AS(make_operator(mm, Protocol::direct, 0), std::invalid_argument);
}

TEST_CASE("direct contraction bound holds and is monotone in alpha") {
  for (int i = 0; i < 12; ++i) {
    const auto mm = metropolis_weights(random_topology(3, i));
    double prev = 2.0;
    for (int a = 1; a <= 10; ++a) {
      const auto op = make_operator(mm, Protocol::direct, a);
      CHECK(op.rho_bar <= std::pow(mm.rho_w, a) + 1e-12);
      CHECK(op.rho_bar <= prev + 1e-14);
      prev = op.rho_bar;
    }
  }
}

TEST_CASE("direct operator equals sequential applications of W") {
  const auto mm = metropolis_weights(build_topology(GraphKind::exponential, 20, 5));
  const auto op = make_operator(mm, Protocol::direct, 4);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 3);
  Eigen::MatrixXd seq = X;
  for (int s = 0; s < 4; ++s) seq = mm.W * seq;
  CHECK(((op.matrix * X) - seq).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("accelerated operator matches an independent recursion oracle") {
  const auto mm = metropolis_weights(build_topology(GraphKind::ring, 10));
  const int alpha = 5;
  const auto op = make_operator(mm, Protocol::accelerated, alpha);
  const double c = std::sqrt(1.0 - mm.rho_w);
  const double eta = (1.0 - c) / (1.0 + c);
  CHECK(op.eta == doctest::Approx(eta).epsilon(1e-15));
  Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(10, 10);
  Eigen::MatrixXd cur = prev;
  for (int s = 0; s < alpha; ++s) {
    Eigen::MatrixXd next = (1.0 + eta) * (mm.W * cur) - eta * prev;
    prev = cur;
    cur = next;
  }
  CHECK((op.matrix - cur).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("both protocols preserve row and column averaging") {
  for (int i = 0; i < 8; ++i) {
    const auto mm = metropolis_weights(random_topology(11, i));
    const int n = static_cast<int>(mm.W.rows());
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    for (Protocol proto : {Protocol::direct, Protocol::accelerated})
      for (int a : {1, 4, 9}) {
        const auto op = make_operator(mm, proto, a);
        CHECK((op.matrix * ones - ones).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((op.matrix.transpose() * ones - ones).cwiseAbs().maxCoeff() <=
              1e-10);
      }
  }
}

TEST_CASE("accelerated operator reports the envelope diagnostic when exceeded") {
  // At small alpha the constant-momentum recursion sits above its asymptotic
  // envelope on this graph; the operator must carry the diagnostic rather
  // than fail.
  const auto mm = metropolis_weights(build_topology(GraphKind::exponential, 20, 5));
  const auto op = make_operator(mm, Protocol::accelerated, 2);
  CHECK(op.rho_bar > op.bound + 1e-9);
  CHECK(op.bound_violated);
  CHECK_FALSE(op.diagnostic.empty());
}

TEST_CASE("topology and matrix serialization round-trips") {
  const Topology t = build_topology(GraphKind::exponential, 12, 3);
  nlohmann::json jt = t;
  const Topology t2 = jt.get<Topology>();
  CHECK(t2.n == t.n);
  CHECK(t2.neighbors == t.neighbors);

  const auto mm = metropolis_weights(t);
  nlohmann::json jm = mm;
  MixingMatrix m2 = jm.get<MixingMatrix>();
  CHECK((m2.W - mm.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m2.rho_w == mm.rho_w);
}
