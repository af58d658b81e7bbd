// Shared scalar/matrix aliases and the deterministic RNG used across the library.
#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace mot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Seeded generator with explicit uniform/normal transforms so that streams are
// reproducible across standard library implementations (std::*_distribution is
// not pinned by the standard).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal();

  // Matrix with independent standard normal entries.
  Matrix normal_matrix(Index rows, Index cols);

  // Matrix with independent uniform [0, 1) entries.
  Matrix uniform_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mot
