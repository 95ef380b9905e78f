#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace metabandit {

struct DegenerateSpectrum : std::runtime_error {
  explicit DegenerateSpectrum(const std::string& what)
      : std::runtime_error(what) {}
};

struct RankOutOfRange : std::runtime_error {
  explicit RankOutOfRange(const std::string& what)
      : std::runtime_error(what) {}
};

/// Orthogonal projection onto a learned subspace together with its
/// complement and the complement component of the learned mean.
struct ProjectionPair {
  Eigen::MatrixXd p_hat;    // projection onto the subspace
  Eigen::MatrixXd p_perp;   // complement, constructed as I - p_hat
  Eigen::VectorXd bias_w;   // p_perp * mean
  int rank_p = 0;           // trace of p_hat
  int rank_q = 0;           // dim - rank_p

  int dim() const { return static_cast<int>(p_hat.rows()); }
};

/// Streaming principal component tracker. Task parameter estimates are
/// absorbed one at a time; components are updated candid-covariance-free,
/// with plain i/(i+1) weights and no learning-rate knobs. The running mean
/// is updated first and each sample enters as its centered residual.
class SubspaceModel {
 public:
  explicit SubspaceModel(int dim);

  int dim() const { return dim_; }
  long count() const { return count_; }
  const Eigen::VectorXd& running_mean() const { return mean_; }

  /// Scaled component j; its norm estimates the j-th covariance eigenvalue.
  const Eigen::VectorXd& scaled_component(int j) const;

  /// Component norms in maintained order (not sorted).
  std::vector<double> eigenvalue_estimates() const;

  std::optional<int> rank_override;

  /// Absorbs one parameter vector.
  void ccipca_update(const Eigen::VectorXd& theta_new);

  /// Overwrites the full state; used by deserialization.
  void restore(long count, const Eigen::VectorXd& mean,
               const std::vector<Eigen::VectorXd>& components);

 private:
  int dim_;
  long count_ = 0;
  Eigen::VectorXd mean_;
  std::vector<Eigen::VectorXd> components_;
};

/// Picks the subspace rank at the largest gap of the sorted eigenvalue
/// estimates; the candidate range is 1..d-1 and ties resolve to the
/// smallest rank. Throws DegenerateSpectrum when every estimate is equal
/// to within 1e-12 (no usable gap), including d == 1.
int select_rank(std::vector<double> eigenvalue_estimates);

/// Rank choice for a model: honors rank_override when set, otherwise the
/// eigengap rule above.
int select_rank(const SubspaceModel& model);

/// Builds the projection pair from the p largest components of the model,
/// re-orthonormalized. p == dim yields the identity projection exactly.
/// Throws RankOutOfRange unless 1 <= p <= dim.
ProjectionPair build_projections(const SubspaceModel& model, int p);

/// Pair projecting onto the column span of `basis` (re-orthonormalized),
/// with bias taken from `mean`.
ProjectionPair projection_from_basis(const Eigen::MatrixXd& basis,
                                     const Eigen::VectorXd& mean);

/// Full-rank pair: p_hat = I, p_perp = 0, bias zero.
ProjectionPair identity_projection(int dim);

/// Rank-zero pair: p_hat = 0, p_perp = I, bias equal to `mean`.
ProjectionPair complement_projection(const Eigen::VectorXd& mean);

/// || p_perp (theta_star - theta_bar) ||.
double projection_error_metric(const ProjectionPair& pair,
                               const Eigen::VectorXd& theta_star,
                               const Eigen::VectorXd& theta_bar);

/// Text serialization, 17 significant digits; round-trips bit-exactly.
void save_subspace(const SubspaceModel& model, const std::string& path);
SubspaceModel load_subspace(const std::string& path);

}  // namespace metabandit
