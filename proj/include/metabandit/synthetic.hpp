#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "metabandit/policies.hpp"
#include "metabandit/rng.hpp"
#include "metabandit/subspace.hpp"

namespace metabandit {

/// Fixed description of a synthetic task distribution. The hidden subspace
/// and the context covariance are drawn once from the two seeds below and
/// then shared by every task of the experiment.
struct SyntheticSpec {
  int dim = 30;
  int true_rank = 15;
  int arms_per_round = 25;
  double task_variance = 1e-3;  // total variance off the subspace
  double param_scale = 1.0;     // norm bound V on task parameters
  double noise_std = 0.1;       // reward noise
  std::uint64_t subspace_seed = 7;
  std::uint64_t context_cov_seed = 11;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// R-diagonal sign correction).
Eigen::MatrixXd random_orthogonal(int dim, Rng& rng);

struct SyntheticTask {
  Eigen::VectorXd theta_star;
  ProjectionPair true_projection;
};

class SyntheticEnv {
 public:
  explicit SyntheticEnv(const SyntheticSpec& spec);

  const SyntheticSpec& spec() const { return spec_; }
  const ProjectionPair& true_pair() const { return pair_; }
  const Eigen::VectorXd& true_mean() const { return mean_; }

  /// Parameter uniform on the V-ball inside the subspace plus Gaussian
  /// off-subspace displacement of total variance task_variance, rescaled
  /// onto the V-ball when it spills over.
  SyntheticTask gen_task(Rng& rng) const;

  /// One round's contexts before normalization: rows x ~ N(0, diag(c)).
  Eigen::MatrixXd sample_contexts_raw(Rng& rng) const;

  /// One round's contexts; any row with norm above 1 is rescaled to 1.
  ArmSet sample_contexts(Rng& rng) const;

  /// x' theta_star plus Gaussian noise.
  double reward(const SyntheticTask& task, const Eigen::VectorXd& x,
                Rng& rng) const;

  /// Best mean reward in the set minus the chosen arm's mean reward.
  double instant_regret(const SyntheticTask& task, const ArmSet& arms,
                        int chosen) const;

 private:
  SyntheticSpec spec_;
  Eigen::MatrixXd basis_;   // dim x true_rank
  ProjectionPair pair_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd cov_sqrt_;  // per-coordinate std of raw contexts
};

}  // namespace metabandit
