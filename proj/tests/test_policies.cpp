#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "doctest.h"
#include "metabandit/policies.hpp"
#include "metabandit/rng.hpp"
#include "metabandit/subspace.hpp"

using namespace metabandit;

namespace {

// Pair spanning e1 in two dimensions.
ProjectionPair span_e1_pair(const Eigen::Vector2d& mean) {
  Eigen::MatrixXd basis(2, 1);
  basis << 1.0, 0.0;
  return projection_from_basis(basis, mean);
}

PolicyConfig base_config() {
  PolicyConfig cfg;
  cfg.lambda1 = 4.0;
  cfg.lambda2 = 1.0;
  cfg.lambda_ridge = 0.5;
  cfg.delta = 0.1;
  cfg.v_bound = 1.0;
  cfg.w_bound = 1.0;
  cfg.alpha = 0.5;
  cfg.horizon = 10;
  return cfg;
}

}  // namespace

TEST_CASE("defaults_for follows the horizon prescriptions") {
  const PolicyConfig cfg = PolicyConfig::defaults_for(250, 1.0, 30);
  cfg.validate();
  CHECK(cfg.lambda2 == 1.0);
  CHECK(cfg.lambda_ridge == doctest::Approx(0.004).epsilon(1e-15));
  CHECK(cfg.delta == doctest::Approx(0.004).epsilon(1e-15));
  CHECK(cfg.lambda1 == 300.0);
  CHECK(cfg.w_bound == 2.0);
  CHECK(cfg.alpha == doctest::Approx(0.18111148749870565).epsilon(1e-14));

  // short horizons clamp alpha to a half
  CHECK(PolicyConfig::defaults_for(2, 1.0, 5).alpha == 0.5);

  const PolicyConfig half = PolicyConfig::defaults_for(100, 0.5, 10);
  CHECK(half.lambda2 == 4.0);
  CHECK(half.w_bound == 1.0);
}

TEST_CASE("validate rejects broken configurations") {
  PolicyConfig cfg = base_config();
  cfg.lambda2 = 8.0;  // above lambda1
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.ucb_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("ts_width matches its closed form") {
  PolicyConfig cfg = base_config();
  CHECK(cfg.ts_width(3) ==
        doctest::Approx(19.194103648752325).epsilon(1e-14));
}

TEST_CASE("arm sets validate geometry and ids") {
  Eigen::MatrixXd contexts(2, 2);
  contexts << 1.0, 0.0, 0.0, 1.0;
  ArmSet arms = ArmSet::from_contexts(contexts);
  CHECK(arms.ids == std::vector<int>{0, 1});
  arms.validate();

  arms.contexts(0, 0) = 1.5;
  CHECK_THROWS_AS(arms.validate(), std::invalid_argument);

  ArmSet empty;
  empty.contexts.resize(0, 2);
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  ArmSet mismatched = ArmSet::from_contexts(Eigen::MatrixXd::Identity(2, 2));
  mismatched.ids.pop_back();
  CHECK_THROWS_AS(mismatched.validate(), std::invalid_argument);
}

// With the pair spanning e1, lambda1 = 4, lambda2 = 1 and mean (3, 1):
// B0 = diag(1, 4), b0 = 4 * P_perp (3,1) = (0, 4), so theta0 = (0, 1).
// After observing x = e1 with reward 2: B = diag(2, 4), b = (2, 4),
// theta = (1, 1). The plain ridge side sees A = diag(1.5, 0.5),
// b' = (2, 0), ridge estimate (4/3, 0).
TEST_CASE("state initialization and update match the hand example") {
  const PolicyConfig cfg = base_config();
  const ProjectionPair pair = span_e1_pair(Eigen::Vector2d(3.0, 1.0));
  ProjectedPolicyState state(pair, cfg);

  CHECK((state.b_matrix().entries() -
         Eigen::Vector2d(1.0, 4.0).asDiagonal().toDenseMatrix())
            .norm() < 1e-12);
  CHECK((state.b_vector() - Eigen::Vector2d(0.0, 4.0)).norm() < 1e-12);
  CHECK((state.theta_hat() - Eigen::Vector2d(0.0, 1.0)).norm() < 1e-12);
  CHECK(state.round() == 0);

  state.update(Eigen::Vector2d(1.0, 0.0), 2.0);
  CHECK((state.b_matrix().entries() -
         Eigen::Vector2d(2.0, 4.0).asDiagonal().toDenseMatrix())
            .norm() < 1e-12);
  CHECK((state.b_vector() - Eigen::Vector2d(2.0, 4.0)).norm() < 1e-12);
  CHECK((state.theta_hat() - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-12);
  CHECK(state.round() == 1);

  CHECK((state.a_matrix().entries() -
         Eigen::Vector2d(1.5, 0.5).asDiagonal().toDenseMatrix())
            .norm() < 1e-12);
  CHECK((state.b_prime() - Eigen::Vector2d(2.0, 0.0)).norm() < 1e-12);
  CHECK((state.ridge_estimate() - Eigen::Vector2d(4.0 / 3.0, 0.0)).norm() <
        1e-12);
}

TEST_CASE("the incremental estimate solves the regularized normal equations") {
  Rng rng(4242);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + rng.uniform_int(5);
    const int span = 1 + rng.uniform_int(d);

    Eigen::MatrixXd basis(d, span);
    for (int j = 0; j < span; ++j) basis.col(j) = rng.gaussian_vector(d);
    const Eigen::VectorXd mean = rng.gaussian_vector(d);
    const ProjectionPair pair = projection_from_basis(basis, mean);

    PolicyConfig cfg = base_config();
    cfg.lambda1 = 1.0 + 9.0 * rng.uniform();
    cfg.lambda2 = cfg.lambda1 * (0.1 + 0.9 * rng.uniform());

    ProjectedPolicyState state(pair, cfg);
    Eigen::MatrixXd gram = cfg.lambda1 * pair.p_perp + cfg.lambda2 * pair.p_hat;
    Eigen::VectorXd rhs = cfg.lambda1 * (pair.p_perp * pair.bias_w);

    const int rounds = 1 + rng.uniform_int(30);
    for (int k = 0; k < rounds; ++k) {
      Eigen::VectorXd x = rng.gaussian_vector(d);
      x /= std::max(1.0, x.norm());
      const double r = rng.gaussian();
      state.update(x, r);
      gram += x * x.transpose();
      rhs += r * x;
    }

    // independent solver on independently accumulated normal equations
    const Eigen::VectorXd direct = Eigen::FullPivLU<Eigen::MatrixXd>(
                                       0.5 * (gram + gram.transpose()))
                                       .solve(rhs);
    CHECK((state.theta_hat() - direct).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("confidence radius matches hand-computed values") {
  // Identity pair, q = 0: radius = sqrt(-2 log delta) + sqrt(lambda2) V.
  PolicyConfig cfg = base_config();
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 1.0;
  const ProjectedPolicyState flat(identity_projection(2), cfg);
  CHECK(confidence_radius(flat, cfg, 2, 0) ==
        doctest::Approx(3.1459660262893472).epsilon(1e-12));

  // Complement pair, q = 2: the lambda1 log-determinant cancels and the
  // residual term lambda1 / sqrt(lambda2) * w kicks in.
  PolicyConfig comp_cfg = base_config();
  comp_cfg.w_bound = 0.5;
  const ProjectedPolicyState comp(
      complement_projection(Eigen::Vector2d::Zero()), comp_cfg);
  CHECK(confidence_radius(comp, comp_cfg, 0, 2) ==
        doctest::Approx(5.1459660262893472).epsilon(1e-12));
}

TEST_CASE("the residual term vanishes exactly when the complement is empty") {
  PolicyConfig narrow = base_config();
  narrow.lambda1 = 1.0;
  narrow.lambda2 = 1.0;
  PolicyConfig wide = narrow;
  wide.w_bound = 100.0;

  const ProjectedPolicyState state(identity_projection(3), narrow);
  CHECK(confidence_radius(state, narrow, 3, 0) ==
        confidence_radius(state, wide, 3, 0));

  const ProjectedPolicyState split(
      complement_projection(Eigen::Vector3d::Zero()), narrow);
  CHECK(confidence_radius(split, narrow, 0, 3) <
        confidence_radius(split, wide, 0, 3));
}

TEST_CASE("ucb_select is greedy at zero width and optimistic at large width") {
  const PolicyConfig cfg = base_config();
  const ProjectionPair pair = span_e1_pair(Eigen::Vector2d(3.0, 1.0));
  ProjectedPolicyState state(pair, cfg);  // theta0 = (0, 1), B0 = diag(1, 4)

  const ArmSet arms = ArmSet::from_contexts(Eigen::MatrixXd::Identity(2, 2));
  CHECK(ucb_select(state, arms, 0.0) == 1);    // greedy on theta
  CHECK(ucb_select(state, arms, 100.0) == 0);  // bonus 100 vs 50 + 1

  // exact ties resolve to the lowest index
  Eigen::MatrixXd same(2, 2);
  same << 1.0, 0.0, 1.0, 0.0;
  CHECK(ucb_select(state, ArmSet::from_contexts(same), 1.0) == 0);

  ArmSet wrong_dim = ArmSet::from_contexts(Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(ucb_select(state, wrong_dim, 0.0), DimensionMismatch);
}

TEST_CASE("ts_select at zero width is greedy and is seed-deterministic") {
  const PolicyConfig cfg = base_config();
  const ProjectionPair pair = span_e1_pair(Eigen::Vector2d(3.0, 1.0));
  ProjectedPolicyState state(pair, cfg);
  const ArmSet arms = ArmSet::from_contexts(Eigen::MatrixXd::Identity(2, 2));

  Rng rng(5);
  CHECK(ts_select(state, arms, cfg, rng, 0.0) == 1);

  Rng a(17);
  Rng b(17);
  for (int i = 0; i < 20; ++i) {
    CHECK(ts_select(state, arms, cfg, a) == ts_select(state, arms, cfg, b));
  }
}

TEST_CASE("ts_select splits symmetric arms evenly") {
  PolicyConfig cfg = base_config();
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 1.0;
  ProjectedPolicyState state(identity_projection(2), cfg);  // theta = 0, B = I
  Eigen::MatrixXd two(2, 2);
  two << 1.0, 0.0, -1.0, 0.0;
  const ArmSet arms = ArmSet::from_contexts(two);

  Rng rng(101);
  int first = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    if (ts_select(state, arms, cfg, rng, 1.0) == 0) first += 1;
  }
  const double freq = static_cast<double>(first) / n;
  CHECK(freq > 0.45);
  CHECK(freq < 0.55);
}

TEST_CASE("classic selectors run on the plain ridge system") {
  PolicyConfig cfg = base_config();
  cfg.lambda_ridge = 1.0;
  SpdMatrix a = SpdMatrix::identity(2);
  Eigen::VectorXd b_prime(2);
  b_prime << 0.0, 1.0;

  const ArmSet arms = ArmSet::from_contexts(Eigen::MatrixXd::Identity(2, 2));
  // equal bonuses, so the estimate decides
  CHECK(classic_linucb_select(a, b_prime, arms, cfg) == 1);

  Rng rng(21);
  CHECK(classic_ts_select(a, b_prime, arms, cfg, rng, 0.0) == 1);
}

TEST_CASE("context factories wire ranks and floors correctly") {
  PolicyConfig cfg = base_config();
  const ProjectionPair pair = span_e1_pair(Eigen::Vector2d::Zero());

  const PolicyContext projected = make_projected_context(pair, cfg);
  CHECK(projected.rank_p == 1);
  CHECK(projected.rank_q == 1);

  Eigen::Vector3d bar(1.0, 2.0, 3.0);
  const PolicyContext oful = make_biased_oful_context(bar, cfg);
  CHECK(oful.rank_p == 0);
  CHECK(oful.rank_q == 3);
  CHECK(oful.pair.p_perp == Eigen::MatrixXd::Identity(3, 3));
  CHECK(oful.pair.bias_w == bar);
  CHECK(oful.cfg.lambda2 == cfg.lambda2);  // above the floor already

  PolicyConfig tiny = cfg;
  tiny.lambda2 = 1e-12;
  const PolicyContext floored = make_biased_oful_context(bar, tiny);
  CHECK(floored.cfg.lambda2 == doctest::Approx(4e-6).epsilon(1e-14));

  const PolicyContext oracle = make_oracle_context(pair, cfg);
  CHECK(oracle.rank_p == pair.rank_p);
  CHECK(oracle.pair.p_hat == pair.p_hat);
}

TEST_CASE("lambda1 equal to lambda2 with a zero mean reduces to plain ridge") {
  Rng rng(777);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + rng.uniform_int(4);
    Eigen::MatrixXd basis(d, 1 + rng.uniform_int(d - 1));
    for (int j = 0; j < basis.cols(); ++j) basis.col(j) = rng.gaussian_vector(d);
    const ProjectionPair pair =
        projection_from_basis(basis, Eigen::VectorXd::Zero(d));

    PolicyConfig cfg = base_config();
    cfg.lambda1 = 2.5;
    cfg.lambda2 = 2.5;
    cfg.lambda_ridge = 2.5;

    ProjectedPolicyState state(pair, cfg);
    for (int k = 0; k < 15; ++k) {
      Eigen::VectorXd x = rng.gaussian_vector(d);
      x /= std::max(1.0, x.norm());
      state.update(x, rng.gaussian());
    }
    CHECK((state.theta_hat() - state.ridge_estimate())
              .lpNorm<Eigen::Infinity>() < 1e-10);
  }
}
