#include "metabandit/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

namespace metabandit {

Eigen::MatrixXd random_orthogonal(int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("random_orthogonal: dim < 1");
  Eigen::MatrixXd g(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) g(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix the signs so the distribution is Haar rather than QR-convention
  // dependent.
  const Eigen::VectorXd r_diag = qr.matrixQR().diagonal();
  for (int j = 0; j < dim; ++j) {
    if (r_diag[j] < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

SyntheticEnv::SyntheticEnv(const SyntheticSpec& spec) : spec_(spec) {
  if (spec.dim < 1) throw std::invalid_argument("SyntheticEnv: dim < 1");
  if (spec.true_rank < 1 || spec.true_rank > spec.dim) {
    throw std::invalid_argument("SyntheticEnv: true_rank out of range");
  }
  if (spec.arms_per_round < 1) {
    throw std::invalid_argument("SyntheticEnv: arms_per_round < 1");
  }
  if (spec.task_variance < 0.0 || spec.param_scale <= 0.0 ||
      spec.noise_std < 0.0) {
    throw std::invalid_argument("SyntheticEnv: bad scale parameters");
  }

  Rng subspace_rng(derive_seed(spec.subspace_seed, 0x5B));
  basis_ = random_orthogonal(spec.dim, subspace_rng).leftCols(spec.true_rank);
  mean_ = Eigen::VectorXd::Zero(spec.dim);
  pair_ = spec.true_rank == spec.dim
              ? identity_projection(spec.dim)
              : projection_from_basis(basis_, mean_);

  Rng cov_rng(derive_seed(spec.context_cov_seed, 0xC0));
  cov_sqrt_.resize(spec.dim);
  for (int i = 0; i < spec.dim; ++i) {
    cov_sqrt_[i] = std::sqrt(cov_rng.uniform());
  }
}

SyntheticTask SyntheticEnv::gen_task(Rng& rng) const {
  const int d = spec_.dim;
  const int q = d - spec_.true_rank;
  const double v_bound = spec_.param_scale;

  // Uniform draw on the V-ball: uniform direction, radius V * u^(1/d).
  Eigen::VectorXd direction = rng.gaussian_vector(d);
  const double norm = direction.norm();
  if (norm > 0.0) direction /= norm;
  const double radius =
      v_bound * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  const Eigen::VectorXd theta_raw = radius * direction;

  Eigen::VectorXd theta = pair_.p_hat * theta_raw;
  if (q > 0) {
    const double off_std = std::sqrt(spec_.task_variance / q);
    theta += pair_.p_perp * (off_std * rng.gaussian_vector(d));
  }
  const double overflow = theta.norm();
  if (overflow > v_bound) theta *= v_bound / overflow;

  return SyntheticTask{theta, pair_};
}

Eigen::MatrixXd SyntheticEnv::sample_contexts_raw(Rng& rng) const {
  Eigen::MatrixXd raw(spec_.arms_per_round, spec_.dim);
  for (int a = 0; a < spec_.arms_per_round; ++a) {
    for (int i = 0; i < spec_.dim; ++i) {
      raw(a, i) = cov_sqrt_[i] * rng.gaussian();
    }
  }
  return raw;
}

ArmSet SyntheticEnv::sample_contexts(Rng& rng) const {
  Eigen::MatrixXd contexts = sample_contexts_raw(rng);
  for (int a = 0; a < contexts.rows(); ++a) {
    const double norm = contexts.row(a).norm();
    if (norm > 1.0) contexts.row(a) /= norm;
  }
  return ArmSet::from_contexts(std::move(contexts));
}

double SyntheticEnv::reward(const SyntheticTask& task, const Eigen::VectorXd& x,
                            Rng& rng) const {
  return x.dot(task.theta_star) + spec_.noise_std * rng.gaussian();
}

double SyntheticEnv::instant_regret(const SyntheticTask& task,
                                    const ArmSet& arms, int chosen) const {
  const Eigen::VectorXd means = arms.contexts * task.theta_star;
  return means.maxCoeff() - means[chosen];
}

}  // namespace metabandit
