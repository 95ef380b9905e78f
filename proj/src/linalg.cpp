#include "metabandit/linalg.hpp"

#include <cmath>

namespace metabandit {

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("SpdMatrix: input is not square");
  }
  m_ = 0.5 * (m + m.transpose());
}

SpdMatrix SpdMatrix::identity(int dim) {
  return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SpdMatrix SpdMatrix::scaled_identity(int dim, double scale) {
  return SpdMatrix(scale * Eigen::MatrixXd::Identity(dim, dim));
}

void SpdMatrix::add_outer(const Eigen::VectorXd& x) {
  if (x.size() != m_.rows()) {
    throw DimensionMismatch("SpdMatrix::add_outer: size mismatch");
  }
  m_ += x * x.transpose();
}

SpdFactor::SpdFactor(const SpdMatrix& m) : llt_(m.entries()) {
  bool ok = llt_.info() == Eigen::Success;
  if (ok) {
    // Eigen does not flag every semi-definite input; require strictly
    // positive, finite pivots.
    const auto diag = llt_.matrixLLT().diagonal();
    for (int i = 0; i < diag.size(); ++i) {
      if (!(diag[i] > 0.0) || !std::isfinite(diag[i])) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    throw NotPositiveDefinite("SpdFactor: matrix is not positive definite");
  }
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != llt_.rows()) {
    throw DimensionMismatch("SpdFactor::solve: size mismatch");
  }
  return llt_.solve(rhs);
}

double SpdFactor::logdet() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double SpdFactor::inv_norm(const Eigen::VectorXd& x) const {
  const double q = x.dot(solve(x));
  return std::sqrt(std::max(q, 0.0));
}

Eigen::VectorXd SpdFactor::sample_with_precision(const Eigen::VectorXd& mean,
                                                 double scale,
                                                 Rng& rng) const {
  if (mean.size() != llt_.rows()) {
    throw DimensionMismatch("SpdFactor::sample_with_precision: size mismatch");
  }
  // If M = L L^T then L^{-T} z has covariance M^{-1} for z ~ N(0, I).
  Eigen::VectorXd z = rng.gaussian_vector(dim());
  Eigen::VectorXd shift = llt_.matrixU().solve(z);
  return mean + scale * shift;
}

Eigen::VectorXd spd_solve(const SpdMatrix& m, const Eigen::VectorXd& rhs) {
  return SpdFactor(m).solve(rhs);
}

double spd_logdet(const SpdMatrix& m) { return SpdFactor(m).logdet(); }

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const SpdMatrix& cov,
                           Rng& rng) {
  if (mean.size() != cov.dim()) {
    throw DimensionMismatch("mvn_sample: mean/covariance size mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov.entries());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("mvn_sample: covariance is not positive definite");
  }
  Eigen::VectorXd z = rng.gaussian_vector(cov.dim());
  return mean + llt.matrixL() * z;
}

}  // namespace metabandit
