#include "flexgt/problems.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "flexgt/rng.hpp"

namespace flexgt {

Regime parse_regime(std::string_view name) {
  if (name == "strongly_convex") return Regime::strongly_convex;
  if (name == "convex") return Regime::convex;
  if (name == "nonconvex") return Regime::nonconvex;
  throw std::invalid_argument("unknown regime: " + std::string(name));
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::strongly_convex: return "strongly_convex";
    case Regime::convex: return "convex";
    case Regime::nonconvex: return "nonconvex";
  }
  return "?";
}

namespace {

// Quadratic-family data: h_i, vbar_i uniform in [0, 1].
void sample_quadratic(int n, int p, std::uint64_t seed, Eigen::MatrixXd& H,
                      Eigen::VectorXd& vbar) {
  H.resize(n, p);
  vbar.resize(n);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 0, kSaltProblem);
    for (int d = 0; d < p; ++d) H(i, d) = rng.uniform();
    vbar[i] = rng.uniform();
  }
}

double quadratic_L(const Eigen::MatrixXd& H, double mu) {
  return 2.0 * H.rowwise().squaredNorm().maxCoeff() + mu;
}

double log1pexp(double t) {
  // log(1 + exp(t)), stable for large |t|
  if (t > 35.0) return t;
  if (t < -35.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

Problem Problem::ridge(int n, int p, double mu, double sigma,
                       std::uint64_t seed) {
  if (n < 1 || p < 1) throw std::invalid_argument("ridge needs n, p >= 1");
  if (mu <= 0.0) throw std::invalid_argument("ridge needs mu > 0");
  if (sigma < 0.0) throw std::invalid_argument("ridge needs sigma >= 0");
  Problem prob;
  prob.family_ = Family::ridge;
  prob.regime_ = Regime::strongly_convex;
  prob.n_ = n;
  prob.p_ = p;
  prob.mu_ = mu;
  prob.sigma_ = sigma;
  prob.seed_ = seed;
  sample_quadratic(n, p, seed, prob.H_, prob.vbar_);
  prob.L_ = quadratic_L(prob.H_, mu);
  prob.solve_optimum();
  return prob;
}

Problem Problem::least_squares(int n, int p, double sigma, std::uint64_t seed) {
  if (n < 1 || p < 1)
    throw std::invalid_argument("least_squares needs n, p >= 1");
  Problem prob;
  prob.family_ = Family::least_squares;
  prob.regime_ = Regime::convex;
  prob.n_ = n;
  prob.p_ = p;
  prob.mu_ = 0.0;
  prob.sigma_ = sigma;
  prob.seed_ = seed;
  sample_quadratic(n, p, seed, prob.H_, prob.vbar_);
  prob.L_ = quadratic_L(prob.H_, 0.0);
  prob.solve_optimum();
  return prob;
}

Problem Problem::from_quadratic_data(Eigen::MatrixXd H, Eigen::VectorXd vbar,
                                     double mu, double sigma,
                                     std::uint64_t seed) {
  if (H.rows() < 1 || H.cols() < 1)
    throw std::invalid_argument("quadratic data needs n, p >= 1");
  if (H.rows() != vbar.size())
    throw std::invalid_argument("feature rows and targets disagree");
  if (mu < 0.0) throw std::invalid_argument("mu must be >= 0");
  Problem prob;
  prob.family_ = mu > 0.0 ? Family::ridge : Family::least_squares;
  prob.regime_ = mu > 0.0 ? Regime::strongly_convex : Regime::convex;
  prob.n_ = static_cast<int>(H.rows());
  prob.p_ = static_cast<int>(H.cols());
  prob.mu_ = mu;
  prob.sigma_ = sigma;
  prob.seed_ = seed;
  prob.H_ = std::move(H);
  prob.vbar_ = std::move(vbar);
  prob.L_ = quadratic_L(prob.H_, mu);
  prob.solve_optimum();
  return prob;
}

Problem Problem::logistic_nonconvex(int n, int p, double sigma,
                                    std::uint64_t seed, int samples_per_node,
                                    double lambda) {
  if (n < 1 || p < 1)
    throw std::invalid_argument("logistic_nonconvex needs n, p >= 1");
  Problem prob;
  prob.family_ = Family::logistic_nc;
  prob.regime_ = Regime::nonconvex;
  prob.n_ = n;
  prob.p_ = p;
  prob.mu_ = 0.0;
  prob.sigma_ = sigma;
  prob.seed_ = seed;
  prob.m_ = samples_per_node;
  prob.lambda_ = lambda;
  prob.A_.resize(n);
  prob.b_.resize(n);

  // Shared teacher plus a per-node offset so local objectives disagree.
  CounterRng teacher_rng(seed, 0, 1, kSaltProblem);
  const Eigen::VectorXd teacher = teacher_rng.normal_vector(p);
  double Lmax = 0.0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 2, kSaltProblem);
    Eigen::VectorXd w_i = teacher + 0.5 * rng.normal_vector(p);
    Eigen::MatrixXd A(samples_per_node, p);
    Eigen::VectorXd b(samples_per_node);
    for (int j = 0; j < samples_per_node; ++j) {
      for (int d = 0; d < p; ++d) A(j, d) = scale * rng.normal();
      const double margin = A.row(j).dot(w_i) + 0.1 * rng.normal();
      b[j] = margin >= 0.0 ? 1.0 : -1.0;
    }
    const double L_i =
        A.rowwise().squaredNorm().sum() / (4.0 * samples_per_node) +
        2.0 * lambda;
    Lmax = std::max(Lmax, L_i);
    prob.A_[i] = std::move(A);
    prob.b_[i] = std::move(b);
  }
  prob.L_ = Lmax;
  return prob;
}

Eigen::VectorXd Problem::grad(int i, const Eigen::VectorXd& x) const {
  if (i < 0 || i >= n_) throw std::out_of_range("node index out of range");
  switch (family_) {
    case Family::ridge:
    case Family::least_squares: {
      const double r = H_.row(i).dot(x) - vbar_[i];
      return 2.0 * r * H_.row(i).transpose() + mu_ * x;
    }
    case Family::logistic_nc: {
      const Eigen::MatrixXd& A = A_[i];
      const Eigen::VectorXd& b = b_[i];
      Eigen::VectorXd g = Eigen::VectorXd::Zero(p_);
      for (int j = 0; j < m_; ++j) {
        const double t = -b[j] * A.row(j).dot(x);
        g -= (b[j] * sigmoid(t)) * A.row(j).transpose();
      }
      g /= static_cast<double>(m_);
      for (int d = 0; d < p_; ++d) {
        const double denom = 1.0 + x[d] * x[d];
        g[d] += lambda_ * 2.0 * x[d] / (denom * denom);
      }
      return g;
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::MatrixXd Problem::grad_all(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd G(n_, p_);
  for (int i = 0; i < n_; ++i) G.row(i) = grad(i, X.row(i)).transpose();
  return G;
}

Eigen::VectorXd Problem::grad_avg(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p_);
  for (int i = 0; i < n_; ++i) g += grad(i, x);
  return g / static_cast<double>(n_);
}

double Problem::value(int i, const Eigen::VectorXd& x) const {
  if (i < 0 || i >= n_) throw std::out_of_range("node index out of range");
  switch (family_) {
    case Family::ridge:
    case Family::least_squares: {
      const double r = H_.row(i).dot(x) - vbar_[i];
      return r * r + 0.5 * mu_ * x.squaredNorm();
    }
    case Family::logistic_nc: {
      double v = 0.0;
      for (int j = 0; j < m_; ++j)
        v += log1pexp(-b_[i][j] * A_[i].row(j).dot(x));
      v /= static_cast<double>(m_);
      for (int d = 0; d < p_; ++d)
        v += lambda_ * x[d] * x[d] / (1.0 + x[d] * x[d]);
      return v;
    }
  }
  throw std::logic_error("unreachable");
}

double Problem::value_avg(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (int i = 0; i < n_; ++i) v += value(i, x);
  return v / static_cast<double>(n_);
}

Eigen::VectorXd Problem::stoch_grad(int i, const Eigen::VectorXd& x,
                                    std::uint64_t noise_seed,
                                    std::uint64_t step,
                                    std::uint64_t salt_offset) const {
  Eigen::VectorXd g = grad(i, x);
  if (sigma_ > 0.0) {
    CounterRng rng(noise_seed, static_cast<std::uint64_t>(i), step,
                   kSaltNoise + salt_offset);
    const double sd = noise_model_ == NoiseModel::total_variance
                          ? sigma_ / std::sqrt(static_cast<double>(p_))
                          : sigma_;
    for (int d = 0; d < p_; ++d) g[d] += sd * rng.normal();
  }
  return g;
}

Eigen::MatrixXd Problem::stoch_grad_all(const Eigen::MatrixXd& Z,
                                        std::uint64_t noise_seed,
                                        std::uint64_t step,
                                        std::uint64_t salt_offset) const {
  Eigen::MatrixXd G(n_, p_);
  for (int i = 0; i < n_; ++i)
    G.row(i) = stoch_grad(i, Z.row(i), noise_seed, step, salt_offset).transpose();
  return G;
}

void Problem::solve_optimum() {
  // (2/n) H'H x + mu x = (2/n) H' vbar
  const double inv_n = 1.0 / static_cast<double>(n_);
  Eigen::MatrixXd M = 2.0 * inv_n * (H_.transpose() * H_);
  M.diagonal().array() += mu_;
  const Eigen::VectorXd rhs = 2.0 * inv_n * (H_.transpose() * vbar_);
  Eigen::LDLT<Eigen::MatrixXd> solver(M);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("optimum: normal equations not solvable");
  optimum_ = solver.solve(rhs);
}

double Problem::heterogeneity(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g_avg = grad_avg(x);
  double acc = 0.0;
  for (int i = 0; i < n_; ++i) acc += (grad(i, x) - g_avg).squaredNorm();
  return acc / static_cast<double>(n_);
}

nlohmann::json Problem::describe() const {
  nlohmann::json j{
      {"family", family_ == Family::ridge          ? "ridge"
                 : family_ == Family::least_squares ? "least_squares"
                                                    : "logistic_nc"},
      {"regime", to_string(regime_)},
      {"n", n_},
      {"p", p_},
      {"L", L_},
      {"mu", mu_},
      {"sigma", sigma_},
      {"seed", seed_},
      {"noise_model", noise_model_ == NoiseModel::total_variance
                          ? "total"
                          : "per_coordinate"}};
  if (family_ == Family::logistic_nc) {
    j["samples_per_node"] = m_;
    j["lambda"] = lambda_;
  }
  return j;
}

}  // namespace flexgt
