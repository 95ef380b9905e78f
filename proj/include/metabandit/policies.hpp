#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "metabandit/linalg.hpp"
#include "metabandit/rng.hpp"
#include "metabandit/subspace.hpp"

namespace metabandit {

/// Regularization and confidence constants shared by all policies.
///
/// The defaults below follow the standard prescriptions for a horizon of n
/// rounds and a parameter norm bound of V. ucb_scale and ts_scale multiply
/// the exploration bonus and the posterior width at selection time only; at
/// 1.0 the policies use the analytical constants unchanged.
struct PolicyConfig {
  double lambda1 = 1.0;      // complement penalty, pulls toward the biased mean
  double lambda2 = 1.0;      // subspace penalty
  double lambda_ridge = 1.0; // plain ridge weight for the unbiased estimate
  double delta = 0.1;        // confidence level
  double v_bound = 1.0;      // norm bound on task parameters
  double w_bound = 2.0;      // surrogate bound on the complement residual
  double alpha = 0.5;        // posterior inflation control for sampling
  double ucb_scale = 1.0;
  double ts_scale = 1.0;
  int horizon = 1;

  static PolicyConfig defaults_for(int horizon, double v_bound, int dim);

  /// Throws std::invalid_argument unless lambda1 >= lambda2 > 0,
  /// lambda_ridge > 0, delta in (0,1), alpha in (0,1), scales > 0.
  void validate() const;

  double w_surrogate() const;

  /// Posterior width for sampling-based selection:
  /// 4 sqrt(log(1/delta) (d+2) / alpha).
  double ts_width(int dim) const;
};

/// One round's candidate actions: contexts as rows, with stable ids.
struct ArmSet {
  Eigen::MatrixXd contexts;  // K x d
  std::vector<int> ids;

  int size() const { return static_cast<int>(contexts.rows()); }
  int dim() const { return static_cast<int>(contexts.cols()); }

  static ArmSet from_contexts(Eigen::MatrixXd contexts);

  /// Throws std::invalid_argument when empty, id count mismatches, or any
  /// row norm exceeds 1 + 1e-12.
  void validate() const;
};

/// Per-task regularized least-squares state. Tracks both the biased system
/// (b_matrix, b_vector) and the plain ridge system (a_matrix, b_prime); the
/// point estimate is re-solved after every update, never cached stale.
class ProjectedPolicyState {
 public:
  ProjectedPolicyState(const ProjectionPair& pair, const PolicyConfig& cfg);

  void update(const Eigen::VectorXd& x, double reward);

  const SpdMatrix& b_matrix() const { return b_; }
  const Eigen::VectorXd& b_vector() const { return b_vec_; }
  const Eigen::VectorXd& theta_hat() const { return theta_hat_; }
  const SpdMatrix& a_matrix() const { return a_; }
  const Eigen::VectorXd& b_prime() const { return b_prime_; }
  int round() const { return round_; }
  int dim() const { return b_.dim(); }

  /// Unbiased ridge estimate a_matrix^{-1} b_prime, used at task end.
  Eigen::VectorXd ridge_estimate() const;

 private:
  SpdMatrix b_;
  SpdMatrix a_;
  Eigen::VectorXd b_vec_;
  Eigen::VectorXd b_prime_;
  Eigen::VectorXd theta_hat_;
  int round_ = 0;
};

/// Confidence radius for the biased estimator with subspace rank p and
/// complement rank q. The complement-residual term is dropped when q == 0
/// because the residual itself is identically zero there.
double confidence_radius(const ProjectedPolicyState& state,
                         const PolicyConfig& cfg, int p, int q);

/// Index of the arm maximizing x' theta_hat + gamma ||x||_{B^{-1}}.
/// Ties break to the lowest index.
int ucb_select(const ProjectedPolicyState& state, const ArmSet& arms,
               double gamma);

/// Posterior-sampling selection: draws theta from N(theta_hat, v^2 B^{-1})
/// and picks the greedy arm. v comes from the config (times ts_scale)
/// unless forced via v_override.
int ts_select(const ProjectedPolicyState& state, const ArmSet& arms,
              const PolicyConfig& cfg, Rng& rng,
              std::optional<double> v_override = std::nullopt);

/// Classic optimism baseline on the plain ridge system (a, b_prime) with
/// lambda_ridge as both regularizer and radius constant.
int classic_linucb_select(const SpdMatrix& a, const Eigen::VectorXd& b_prime,
                          const ArmSet& arms, const PolicyConfig& cfg);

/// Classic posterior-sampling baseline on the plain ridge system.
int classic_ts_select(const SpdMatrix& a, const Eigen::VectorXd& b_prime,
                      const ArmSet& arms, const PolicyConfig& cfg, Rng& rng,
                      std::optional<double> v_override = std::nullopt);

/// A policy's frozen per-task inputs: the projection pair it regularizes
/// against plus the effective config and ranks fed to the radius.
struct PolicyContext {
  ProjectionPair pair;
  PolicyConfig cfg;
  int rank_p = 0;
  int rank_q = 0;
};

PolicyContext make_projected_context(const ProjectionPair& pair,
                                     const PolicyConfig& cfg);

/// Bias-only variant: projection forced to the full complement (p_perp = I)
/// so the state shrinks toward theta_bar in every direction. lambda2 is
/// floored at 1e-6 * lambda1 to keep the initial system invertible.
PolicyContext make_biased_oful_context(const Eigen::VectorXd& theta_bar,
                                       const PolicyConfig& cfg);

/// Oracle variant: the environment's true pair instead of a learned one.
PolicyContext make_oracle_context(const ProjectionPair& true_pair,
                                  const PolicyConfig& cfg);

}  // namespace metabandit
