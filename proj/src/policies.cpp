#include "metabandit/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace metabandit {

PolicyConfig PolicyConfig::defaults_for(int horizon, double v_bound, int dim) {
  if (horizon < 1) throw std::invalid_argument("defaults_for: horizon < 1");
  if (v_bound <= 0.0) throw std::invalid_argument("defaults_for: v_bound <= 0");
  PolicyConfig cfg;
  cfg.horizon = horizon;
  cfg.v_bound = v_bound;
  cfg.lambda2 = 1.0 / (v_bound * v_bound);
  cfg.lambda_ridge = 1.0 / (horizon * v_bound * v_bound);
  cfg.delta = 1.0 / horizon;
  cfg.lambda1 = 10.0 * cfg.lambda2 * dim;
  cfg.w_bound = 2.0 * v_bound;
  cfg.alpha = horizon <= 3
                  ? 0.5
                  : std::min(1.0 / std::log(static_cast<double>(horizon)),
                             0.999);
  return cfg;
}

void PolicyConfig::validate() const {
  if (!(lambda2 > 0.0) || !(lambda1 >= lambda2)) {
    throw std::invalid_argument(
        "PolicyConfig: need lambda1 >= lambda2 > 0");
  }
  if (!(lambda_ridge > 0.0)) {
    throw std::invalid_argument("PolicyConfig: need lambda_ridge > 0");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("PolicyConfig: need delta in (0, 1)");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("PolicyConfig: need alpha in (0, 1)");
  }
  if (!(v_bound > 0.0) || !(w_bound >= 0.0)) {
    throw std::invalid_argument("PolicyConfig: bad norm bounds");
  }
  if (!(ucb_scale > 0.0) || !(ts_scale > 0.0)) {
    throw std::invalid_argument("PolicyConfig: scales must be positive");
  }
  if (horizon < 1) throw std::invalid_argument("PolicyConfig: horizon < 1");
}

double PolicyConfig::w_surrogate() const {
  return std::min(w_bound, 2.0 * v_bound);
}

double PolicyConfig::ts_width(int dim) const {
  return 4.0 * std::sqrt(std::log(1.0 / delta) * (dim + 2) / alpha);
}

ArmSet ArmSet::from_contexts(Eigen::MatrixXd contexts) {
  ArmSet arms;
  arms.ids.resize(static_cast<size_t>(contexts.rows()));
  for (size_t i = 0; i < arms.ids.size(); ++i) {
    arms.ids[i] = static_cast<int>(i);
  }
  arms.contexts = std::move(contexts);
  return arms;
}

void ArmSet::validate() const {
  if (size() < 1) throw std::invalid_argument("ArmSet: empty");
  if (ids.size() != static_cast<size_t>(size())) {
    throw std::invalid_argument("ArmSet: id count mismatch");
  }
  for (int a = 0; a < size(); ++a) {
    if (contexts.row(a).norm() > 1.0 + 1e-12) {
      throw std::invalid_argument("ArmSet: context norm exceeds 1");
    }
  }
}

ProjectedPolicyState::ProjectedPolicyState(const ProjectionPair& pair,
                                           const PolicyConfig& cfg)
    : b_(SpdMatrix(cfg.lambda1 * pair.p_perp + cfg.lambda2 * pair.p_hat)),
      a_(SpdMatrix::scaled_identity(pair.dim(), cfg.lambda_ridge)),
      b_vec_(cfg.lambda1 * (pair.p_perp * pair.bias_w)),
      b_prime_(Eigen::VectorXd::Zero(pair.dim())) {
  theta_hat_ = SpdFactor(b_).solve(b_vec_);
}

void ProjectedPolicyState::update(const Eigen::VectorXd& x, double reward) {
  if (x.size() != dim()) {
    throw DimensionMismatch("ProjectedPolicyState::update: context mismatch");
  }
  b_.add_outer(x);
  a_.add_outer(x);
  b_vec_ += reward * x;
  b_prime_ += reward * x;
  theta_hat_ = SpdFactor(b_).solve(b_vec_);
  round_ += 1;
}

Eigen::VectorXd ProjectedPolicyState::ridge_estimate() const {
  return SpdFactor(a_).solve(b_prime_);
}

namespace {

double radius_from_logdet(double logdet, const PolicyConfig& cfg, int p,
                          int q) {
  double arg = logdet - 2.0 * std::log(cfg.delta);
  if (q > 0) arg -= q * std::log(cfg.lambda1);
  if (p > 0) arg -= p * std::log(cfg.lambda2);
  const double sqrt_l2 = std::sqrt(cfg.lambda2);
  double radius = std::sqrt(std::max(arg, 0.0)) + sqrt_l2 * cfg.v_bound;
  // With no complement the residual being bounded is identically zero.
  if (q > 0) radius += cfg.lambda1 / sqrt_l2 * cfg.w_surrogate();
  return radius;
}

int greedy_argmax(const ArmSet& arms, const Eigen::VectorXd& theta) {
  int best = 0;
  double best_score = arms.contexts.row(0).dot(theta);
  for (int a = 1; a < arms.size(); ++a) {
    const double score = arms.contexts.row(a).dot(theta);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

int optimistic_argmax(const SpdMatrix& gram, const Eigen::VectorXd& estimate,
                      const ArmSet& arms, double gamma) {
  const SpdFactor factor(gram);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < arms.size(); ++a) {
    const Eigen::VectorXd x = arms.contexts.row(a);
    const double score = x.dot(estimate) + gamma * factor.inv_norm(x);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

}  // namespace

double confidence_radius(const ProjectedPolicyState& state,
                         const PolicyConfig& cfg, int p, int q) {
  const double logdet = SpdFactor(state.b_matrix()).logdet();
  return radius_from_logdet(logdet, cfg, p, q);
}

int ucb_select(const ProjectedPolicyState& state, const ArmSet& arms,
               double gamma) {
  if (arms.size() < 1) throw std::invalid_argument("ucb_select: no arms");
  if (arms.dim() != state.dim()) {
    throw DimensionMismatch("ucb_select: arm dimension mismatch");
  }
  return optimistic_argmax(state.b_matrix(), state.theta_hat(), arms, gamma);
}

int ts_select(const ProjectedPolicyState& state, const ArmSet& arms,
              const PolicyConfig& cfg, Rng& rng,
              std::optional<double> v_override) {
  if (arms.size() < 1) throw std::invalid_argument("ts_select: no arms");
  if (arms.dim() != state.dim()) {
    throw DimensionMismatch("ts_select: arm dimension mismatch");
  }
  const double v =
      v_override ? *v_override : cfg.ts_scale * cfg.ts_width(state.dim());
  const Eigen::VectorXd draw =
      SpdFactor(state.b_matrix())
          .sample_with_precision(state.theta_hat(), v, rng);
  return greedy_argmax(arms, draw);
}

int classic_linucb_select(const SpdMatrix& a, const Eigen::VectorXd& b_prime,
                          const ArmSet& arms, const PolicyConfig& cfg) {
  if (arms.size() < 1) {
    throw std::invalid_argument("classic_linucb_select: no arms");
  }
  if (arms.dim() != a.dim()) {
    throw DimensionMismatch("classic_linucb_select: arm dimension mismatch");
  }
  const SpdFactor factor(a);
  // Same radius family, degenerated to a single ridge weight: the whole
  // space counts as "subspace" (p = d, q = 0) at lambda_ridge.
  PolicyConfig flat = cfg;
  flat.lambda1 = cfg.lambda_ridge;
  flat.lambda2 = cfg.lambda_ridge;
  const double gamma =
      cfg.ucb_scale * radius_from_logdet(factor.logdet(), flat, a.dim(), 0);
  return optimistic_argmax(a, factor.solve(b_prime), arms, gamma);
}

int classic_ts_select(const SpdMatrix& a, const Eigen::VectorXd& b_prime,
                      const ArmSet& arms, const PolicyConfig& cfg, Rng& rng,
                      std::optional<double> v_override) {
  if (arms.size() < 1) {
    throw std::invalid_argument("classic_ts_select: no arms");
  }
  if (arms.dim() != a.dim()) {
    throw DimensionMismatch("classic_ts_select: arm dimension mismatch");
  }
  const double v =
      v_override ? *v_override : cfg.ts_scale * cfg.ts_width(a.dim());
  const SpdFactor factor(a);
  const Eigen::VectorXd draw =
      factor.sample_with_precision(factor.solve(b_prime), v, rng);
  return greedy_argmax(arms, draw);
}

PolicyContext make_projected_context(const ProjectionPair& pair,
                                     const PolicyConfig& cfg) {
  return PolicyContext{pair, cfg, pair.rank_p, pair.rank_q};
}

PolicyContext make_biased_oful_context(const Eigen::VectorXd& theta_bar,
                                       const PolicyConfig& cfg) {
  PolicyContext ctx;
  ctx.pair = complement_projection(theta_bar);
  ctx.cfg = cfg;
  ctx.cfg.lambda2 = std::max(cfg.lambda2, 1e-6 * cfg.lambda1);
  ctx.rank_p = 0;
  ctx.rank_q = ctx.pair.dim();
  return ctx;
}

PolicyContext make_oracle_context(const ProjectionPair& true_pair,
                                  const PolicyConfig& cfg) {
  return PolicyContext{true_pair, cfg, true_pair.rank_p, true_pair.rank_q};
}

}  // namespace metabandit
