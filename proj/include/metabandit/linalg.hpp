#pragma once

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "metabandit/rng.hpp"

namespace metabandit {

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(const std::string& what)
      : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what)
      : std::runtime_error(what) {}
};

/// Square symmetric matrix intended to be positive definite. The constructor
/// symmetrizes its input as (M + M^T) / 2; definiteness is only established
/// when a factorization is attempted.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Eigen::MatrixXd& m);

  static SpdMatrix identity(int dim);
  static SpdMatrix scaled_identity(int dim, double scale);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& entries() const { return m_; }

  /// M += x x^T. Exact symmetry is preserved.
  void add_outer(const Eigen::VectorXd& x);

 private:
  Eigen::MatrixXd m_;
};

/// Cholesky factorization of an SpdMatrix. Throws NotPositiveDefinite when
/// the matrix has a non-positive or non-finite pivot.
class SpdFactor {
 public:
  explicit SpdFactor(const SpdMatrix& m);

  int dim() const { return static_cast<int>(llt_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// log det M via the Cholesky diagonal.
  double logdet() const;

  /// sqrt(x^T M^{-1} x), clamped at zero against rounding.
  double inv_norm(const Eigen::VectorXd& x) const;

  /// Draws from N(mean, scale^2 * M^{-1}) without forming the inverse.
  Eigen::VectorXd sample_with_precision(const Eigen::VectorXd& mean,
                                        double scale, Rng& rng) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::VectorXd spd_solve(const SpdMatrix& m, const Eigen::VectorXd& rhs);
double spd_logdet(const SpdMatrix& m);

/// Draws from N(mean, cov). Two calls with identically seeded generators
/// produce identical vectors.
Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const SpdMatrix& cov,
                           Rng& rng);

}  // namespace metabandit
