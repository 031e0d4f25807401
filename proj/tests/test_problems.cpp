#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flexgt/problems.hpp"
#include "flexgt/rng.hpp"

using namespace flexgt;

namespace {

Problem scalar_ridge(double h, double vbar, double mu) {
  Eigen::MatrixXd H(1, 1);
  H(0, 0) = h;
  Eigen::VectorXd v(1);
  v[0] = vbar;
  return Problem::from_quadratic_data(H, v, mu, 0.0);
}

Eigen::VectorXd central_diff(const Problem& prob, int i,
                             const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (int d = 0; d < x.size(); ++d) {
    Eigen::VectorXd hi = x, lo = x;
    hi[d] += step;
    lo[d] -= step;
    g[d] = (prob.value(i, hi) - prob.value(i, lo)) / (2.0 * step);
  }
  return g;
}

}  // namespace

TEST_CASE("scalar ridge gradient: f(x) = x^2 + x^2/2 has gradient 3x") {
  const Problem prob = scalar_ridge(1.0, 0.0, 1.0);
  Eigen::VectorXd x(1);
  x[0] = 2.0;
  CHECK(prob.grad(0, x)[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(prob.L() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("scalar ridge optimum: 3x = 2 gives x* = 2/3") {
  const Problem prob = scalar_ridge(1.0, 1.0, 1.0);
  const auto xstar = prob.optimum();
  REQUIRE(xstar.has_value());
  CHECK((*xstar)[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("make_ridge records L = 2 max ||h||^2 + mu and samples in [0,1]") {
  const Problem prob = Problem::ridge(20, 10, 0.001, 0.1, 7);
  double mx = 0.0;
  for (int i = 0; i < prob.n(); ++i) {
    mx = std::max(mx, prob.features().row(i).squaredNorm());
    for (int d = 0; d < prob.p(); ++d) {
      CHECK(prob.features()(i, d) >= 0.0);
      CHECK(prob.features()(i, d) <= 1.0);
    }
    CHECK(prob.targets()[i] >= 0.0);
    CHECK(prob.targets()[i] <= 1.0);
  }
  CHECK(prob.L() == doctest::Approx(2.0 * mx + 0.001).epsilon(1e-15));
  CHECK(prob.mu() == 0.001);
  CHECK(prob.regime() == Regime::strongly_convex);
}

TEST_CASE("make_ridge rejects invalid parameters") {
  CHECK_THROWS_AS(Problem::ridge(4, 3, 0.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::ridge(4, 3, -1.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::ridge(0, 3, 1.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::ridge(2, 2, 1.0, 0.1, 1).grad(5, Eigen::Vector2d()),
                  std::out_of_range);
}

TEST_CASE("gradients are L-Lipschitz on sampled pairs") {
  const Problem prob = Problem::ridge(10, 6, 0.01, 0.0, 3);
  CounterRng rng(42, 0, 0, kSaltProblem);
  for (int rep = 0; rep < 1000; ++rep) {
    const int i = static_cast<int>(rng.next_u64() % 10);
    const Eigen::VectorXd x = 3.0 * rng.normal_vector(6);
    const Eigen::VectorXd y = 3.0 * rng.normal_vector(6);
    const double lhs = (prob.grad(i, x) - prob.grad(i, y)).norm();
    CHECK(lhs <= prob.L() * (x - y).norm() * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("ridge gradient matches central finite differences") {
  const Problem prob = Problem::ridge(6, 5, 0.5, 0.0, 11);
  CounterRng rng(5, 0, 0, kSaltProblem);
  for (int rep = 0; rep < 50; ++rep) {
    const int i = static_cast<int>(rng.next_u64() % 6);
    const Eigen::VectorXd x = rng.normal_vector(5);
    const Eigen::VectorXd g = prob.grad(i, x);
    const Eigen::VectorXd fd = central_diff(prob, i, x, 1e-6);
    CHECK((g - fd).norm() <= 1e-7 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("averaged ridge gradient vanishes at the optimum") {
  const Problem prob = Problem::ridge(20, 10, 0.05, 0.0, 9);
  const auto xstar = prob.optimum();
  REQUIRE(xstar.has_value());
  CHECK(prob.grad_avg(*xstar).norm() <= 1e-9);
}

TEST_CASE("coordinate perturbations of the optimum increase f") {
  const Problem prob = Problem::ridge(12, 6, 0.2, 0.0, 13);
  const Eigen::VectorXd xstar = *prob.optimum();
  const double fstar = prob.value_avg(xstar);
  for (int d = 0; d < prob.p(); ++d)
    for (double eps : {1e-3, -1e-3}) {
      Eigen::VectorXd x = xstar;
      x[d] += eps;
      CHECK(prob.value_avg(x) > fstar);
    }
}

TEST_CASE("stochastic gradient with sigma = 0 is bitwise the exact gradient") {
  const Problem prob = Problem::ridge(8, 4, 1.0, 0.0, 17);
  CounterRng rng(1, 0, 0, kSaltProblem);
  const Eigen::VectorXd x = rng.normal_vector(4);
  for (int i = 0; i < 8; ++i)
    CHECK((prob.stoch_grad(i, x, 99, 3) - prob.grad(i, x)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("stochastic gradient oracle is unbiased with variance sigma^2") {
  const int p = 5;
  const double sigma = 0.3;
  const Problem prob = Problem::ridge(4, p, 1.0, sigma, 23);
  CounterRng rng(2, 0, 0, kSaltProblem);
  const Eigen::VectorXd x = rng.normal_vector(p);
  const Eigen::VectorXd g = prob.grad(1, x);

  const long N = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  double var = 0.0;
  for (long s = 0; s < N; ++s) {
    const Eigen::VectorXd gs = prob.stoch_grad(1, x, 1234, s);
    mean += gs;
    var += (gs - g).squaredNorm();
  }
  mean /= N;
  var /= N;
  // coordinate means: 4-sigma band around the exact gradient
  const double coord_tol = 4.0 * (sigma / std::sqrt(double(p))) / std::sqrt(double(N));
  for (int d = 0; d < p; ++d) CHECK(std::abs(mean[d] - g[d]) <= coord_tol);
  CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.05));
  CHECK(var <= sigma * sigma * 1.05);
}

TEST_CASE("per-coordinate noise model scales total variance by p") {
  const int p = 6;
  const double sigma = 0.2;
  Problem prob = Problem::ridge(2, p, 1.0, sigma, 29);
  prob.set_noise_model(NoiseModel::per_coordinate);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd g = prob.grad(0, x);
  double var = 0.0;
  const long N = 40000;
  for (long s = 0; s < N; ++s)
    var += (prob.stoch_grad(0, x, 7, s) - g).squaredNorm();
  var /= N;
  CHECK(var == doctest::Approx(p * sigma * sigma).epsilon(0.05));
}

TEST_CASE("heterogeneity is zero for a single node and for identical nodes") {
  const Problem single = Problem::ridge(1, 3, 1.0, 0.0, 31);
  CHECK(single.heterogeneity(Eigen::Vector3d(1, 2, 3)) == 0.0);

  Eigen::MatrixXd H(4, 3);
  for (int i = 0; i < 4; ++i) H.row(i) << 0.3, 0.5, 0.1;
  const Problem same = Problem::from_quadratic_data(
      H, Eigen::VectorXd::Constant(4, 0.7), 0.5, 0.0);
  CHECK(same.heterogeneity(Eigen::Vector3d(1, -1, 2)) <= 1e-28);
}

TEST_CASE("heterogeneity matches a direct summation oracle") {
  const Problem prob = Problem::ridge(10, 4, 0.01, 0.0, 37);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < 10; ++i) avg += prob.grad(i, x);
  avg /= 10.0;
  double acc = 0.0;
  for (int i = 0; i < 10; ++i) acc += (prob.grad(i, x) - avg).squaredNorm();
  acc /= 10.0;
  CHECK(prob.heterogeneity(x) == doctest::Approx(acc).epsilon(1e-12));
  CHECK(prob.heterogeneity(x) > 0.0);
}

TEST_CASE("nonconvex gradient matches finite differences at random points") {
  const Problem prob = Problem::logistic_nonconvex(5, 6, 0.0, 41);
  CounterRng rng(8, 0, 0, kSaltProblem);
  for (int rep = 0; rep < 100; ++rep) {
    const int i = static_cast<int>(rng.next_u64() % 5);
    const Eigen::VectorXd x = 2.0 * rng.normal_vector(6);
    const Eigen::VectorXd g = prob.grad(i, x);
    const Eigen::VectorXd fd = central_diff(prob, i, x, 1e-6);
    CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("nonconvex logistic gradient at the origin has a closed form") {
  const Problem prob = Problem::logistic_nonconvex(4, 5, 0.0, 43, 16, 0.2);
  for (int i = 0; i < 4; ++i) {
    const auto& A = prob.nc_samples(i);
    const auto& b = prob.nc_labels(i);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(5);
    for (int j = 0; j < A.rows(); ++j)
      expected -= 0.5 * b[j] * A.row(j).transpose();
    expected /= static_cast<double>(A.rows());
    // the penalty gradient vanishes at 0
    CHECK((prob.grad(i, Eigen::VectorXd::Zero(5)) - expected)
              .cwiseAbs()
              .maxCoeff() <= 1e-15);
  }
}

TEST_CASE("lambda = 0 removes the nonconvex penalty") {
  const Problem with = Problem::logistic_nonconvex(3, 4, 0.0, 47, 12, 0.3);
  const Problem without = Problem::logistic_nonconvex(3, 4, 0.0, 47, 12, 0.0);
  CounterRng rng(10, 0, 0, kSaltProblem);
  const Eigen::VectorXd x = rng.normal_vector(4);
  for (int i = 0; i < 3; ++i) {
    double pen = 0.0;
    for (int d = 0; d < 4; ++d) pen += 0.3 * x[d] * x[d] / (1.0 + x[d] * x[d]);
    CHECK(with.value(i, x) - without.value(i, x) ==
          doctest::Approx(pen).epsilon(1e-12));
  }
  CHECK(without.optimum() == std::nullopt);
  CHECK(with.value_avg(Eigen::VectorXd::Zero(4)) >= 0.0);  // f* >= 0
}

TEST_CASE("problem description serializes parameters and seed") {
  const Problem prob = Problem::ridge(6, 3, 0.25, 0.1, 51);
  const auto j = prob.describe();
  CHECK(j.at("family") == "ridge");
  CHECK(j.at("n") == 6);
  CHECK(j.at("mu") == 0.25);
  CHECK(j.at("seed") == 51);
}
