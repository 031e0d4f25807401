#ifndef FLEXGT_PROBLEMS_HPP
#define FLEXGT_PROBLEMS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

namespace flexgt {

enum class Regime { strongly_convex, convex, nonconvex };
enum class NoiseModel {
  total_variance,   // per-coordinate variance sigma^2 / p, E||delta||^2 = sigma^2
  per_coordinate,   // per-coordinate variance sigma^2,     E||delta||^2 = p sigma^2
};

Regime parse_regime(std::string_view name);
std::string to_string(Regime r);

/// Collection of n local objectives with deterministic gradients, a seeded
/// stochastic-gradient oracle, and smoothness/convexity constants.
///
/// Families:
///   ridge          f_i(x) = (h_i'x - vbar_i)^2 + (mu/2)||x||^2
///   least_squares  f_i(x) = (h_i'x - vbar_i)^2                  (mu = 0)
///   logistic_nc    f_i(x) = (1/m) sum_j log(1+exp(-b_ij a_ij'x))
///                           + lambda sum_d x_d^2/(1+x_d^2)
///
/// Feature vectors h_i (and per-node logistic data) differ across nodes, which
/// is the only source of heterogeneity.
class Problem {
 public:
  enum class Family { ridge, least_squares, logistic_nc };

  static Problem ridge(int n, int p, double mu, double sigma,
                       std::uint64_t seed);
  static Problem least_squares(int n, int p, double sigma, std::uint64_t seed);
  /// Quadratic family from explicit data; mu = 0 builds the convex variant.
  static Problem from_quadratic_data(Eigen::MatrixXd H, Eigen::VectorXd vbar,
                                     double mu, double sigma,
                                     std::uint64_t seed = 0);
  static Problem logistic_nonconvex(int n, int p, double sigma,
                                    std::uint64_t seed, int samples_per_node = 20,
                                    double lambda = 0.1);

  int n() const { return n_; }
  int p() const { return p_; }
  Regime regime() const { return regime_; }
  Family family() const { return family_; }
  double L() const { return L_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  std::uint64_t seed() const { return seed_; }
  NoiseModel noise_model() const { return noise_model_; }
  void set_noise_model(NoiseModel m) { noise_model_ = m; }
  double lambda() const { return lambda_; }

  /// Exact gradient of f_i at x.
  Eigen::VectorXd grad(int i, const Eigen::VectorXd& x) const;
  /// Row i = gradient of f_i at row i of X.
  Eigen::MatrixXd grad_all(const Eigen::MatrixXd& X) const;
  /// Gradient of the average objective f at x.
  Eigen::VectorXd grad_avg(const Eigen::VectorXd& x) const;

  double value(int i, const Eigen::VectorXd& x) const;
  /// f(x) = (1/n) sum_i f_i(x).
  double value_avg(const Eigen::VectorXd& x) const;

  /// grad(i, x) plus zero-mean Gaussian noise drawn from the stream keyed by
  /// (noise_seed, i, step). With sigma = 0 this is bitwise equal to grad.
  Eigen::VectorXd stoch_grad(int i, const Eigen::VectorXd& x,
                             std::uint64_t noise_seed, std::uint64_t step,
                             std::uint64_t salt_offset = 0) const;
  Eigen::MatrixXd stoch_grad_all(const Eigen::MatrixXd& Z,
                                 std::uint64_t noise_seed, std::uint64_t step,
                                 std::uint64_t salt_offset = 0) const;

  /// Closed-form minimizer for ridge / least squares (solved once at
  /// construction), nullopt otherwise.
  const std::optional<Eigen::VectorXd>& optimum() const { return optimum_; }

  /// (1/n) sum_i ||grad f_i(x) - grad f(x)||^2 at the given point.
  double heterogeneity(const Eigen::VectorXd& x) const;

  nlohmann::json describe() const;

  // Family data, exposed for tests and serialization.
  const Eigen::MatrixXd& features() const { return H_; }
  const Eigen::VectorXd& targets() const { return vbar_; }
  const Eigen::MatrixXd& nc_samples(int i) const { return A_[i]; }
  const Eigen::VectorXd& nc_labels(int i) const { return b_[i]; }

 private:
  Problem() = default;

  Family family_ = Family::ridge;
  Regime regime_ = Regime::strongly_convex;
  int n_ = 0, p_ = 0;
  double L_ = 0.0, mu_ = 0.0, sigma_ = 0.0;
  std::uint64_t seed_ = 0;
  NoiseModel noise_model_ = NoiseModel::total_variance;

  void solve_optimum();

  // ridge / least squares
  Eigen::MatrixXd H_;      // n x p feature rows
  Eigen::VectorXd vbar_;   // n targets
  std::optional<Eigen::VectorXd> optimum_;

  // logistic_nc: per node, m x p data block and m labels
  std::vector<Eigen::MatrixXd> A_;
  std::vector<Eigen::VectorXd> b_;
  int m_ = 0;
  double lambda_ = 0.0;
};

}  // namespace flexgt

#endif  // FLEXGT_PROBLEMS_HPP
