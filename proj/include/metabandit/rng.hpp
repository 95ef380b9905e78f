#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace metabandit {

/// Deterministic random source. All randomness in the library flows through
/// this class so that a run is reproducible from its seed alone, independent
/// of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal via Box-Muller.
  double gaussian();

  /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  int uniform_int(int n);

  Eigen::VectorXd gaussian_vector(int dim);

 private:
  std::mt19937_64 engine_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace metabandit
