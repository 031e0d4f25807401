#ifndef FLEXGT_RNG_HPP
#define FLEXGT_RNG_HPP

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace flexgt {

// Stream salts keep independent uses of the same (seed, node, step) key from
// colliding (problem data vs. gradient noise vs. initialization).
inline constexpr std::uint64_t kSaltNoise = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kSaltProblem = 0xbf58476d1ce4e5b9ULL;
inline constexpr std::uint64_t kSaltTopology = 0x94d049bb133111ebULL;
inline constexpr std::uint64_t kSaltResample = 0xd6e8feb86659fd93ULL;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (seed, node, step, salt).
///
/// Every draw is a pure function of the key and the draw index, so samples are
/// reproducible regardless of execution order or thread count. Normal variates
/// come from Box-Muller over the raw 64-bit stream, which keeps the bit
/// patterns identical across standard library implementations.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t node, std::uint64_t step,
             std::uint64_t salt) {
    state_ = seed;
    (void)splitmix64(state_);
    state_ ^= node * 0xff51afd7ed558ccdULL;
    (void)splitmix64(state_);
    state_ ^= step * 0xc4ceb9fe1a85ec53ULL;
    (void)splitmix64(state_);
    state_ ^= salt;
    (void)splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform draw in (0, 1], never exactly zero.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) v[d] = normal();
    return v;
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace flexgt

#endif  // FLEXGT_RNG_HPP
