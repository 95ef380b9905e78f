#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metabandit/movielens.hpp"
#include "metabandit/policies.hpp"
#include "metabandit/synthetic.hpp"

namespace metabandit {

enum class PolicyKind {
  ProjectedLinUcb,
  ProjectedTs,
  LinUcb,
  LinTs,
  BiasedOful,
  OracleLinUcb,
  OracleTs,
};

std::string policy_name(PolicyKind kind);
PolicyKind policy_from_name(const std::string& name);

enum class RankMode { EigengapAuto, FixedRank };

/// Everything a run needs besides the environment itself. Identical configs
/// with identical seeds reproduce identical logs bit for bit.
struct ExperimentConfig {
  PolicyKind policy = PolicyKind::ProjectedLinUcb;
  int num_tasks = 100;
  int rounds_per_task = 250;
  PolicyConfig policy_cfg;
  RankMode rank_mode = RankMode::EigengapAuto;
  int fixed_rank_p = 0;   // used when rank_mode == FixedRank
  int init_tasks = -1;    // -1: dim tasks for subspace learners, 0 otherwise
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int heldout_draws = 200;  // per-task draws for the subspace error curve

  void validate() const;
};

struct RegretRow {
  std::uint64_t seed;
  int task;   // 1-based
  int round;  // 0-based within the task
  double inst_regret;
  double cum_regret;  // within the task
};

struct RegretLog {
  std::string policy;
  std::string config_hash;
  int rounds_per_task = 0;
  std::vector<std::uint64_t> seeds_completed;
  std::vector<std::pair<std::uint64_t, std::string>> seeds_failed;
  std::vector<RegretRow> rows;
};

struct CurvePoint {
  int index = 0;
  double mean = 0.0;
  double stderr_value = 0.0;
  long count = 0;
};

/// Runs one policy against the synthetic task distribution.
RegretLog run_experiment(const ExperimentConfig& cfg, const SyntheticEnv& env);

/// Runs one policy over MovieLens users (each user is a task, visited in a
/// per-seed shuffled order). Oracle policies and the subspace-sampling
/// policy are not defined on offline data and are rejected.
RegretLog run_experiment(const ExperimentConfig& cfg, const MovieLensEnv& env);

/// Mean within-task cumulative regret per round index, over (seed, task).
std::vector<CurvePoint> expected_transfer_regret(const RegretLog& log);

/// Seed-mean running total of per-task regret, per task index.
std::vector<CurvePoint> cumulative_regret_over_tasks(const RegretLog& log);

/// Per-seed grand totals of instantaneous regret, in seeds_completed order.
std::vector<double> seed_total_regret(const RegretLog& log);

struct SweepPoint {
  int complement_rank;  // q; 0 means the classic baseline
  double mean_total = 0.0;
  double stderr_value = 0.0;
};

/// Total regret as a function of the complement rank q. q == 0 runs the
/// classic baseline; q > 0 runs the subspace policy with fixed rank d - q.
std::vector<SweepPoint> rank_sweep(const ExperimentConfig& cfg,
                                   const SyntheticEnv& env,
                                   const std::vector<int>& q_values);

struct WErrorRow {
  std::uint64_t seed;
  int task;          // pair state after this many tasks
  double rel_error;  // | mean(W)^2 / task_variance - 1 |
  bool in_init;
};

struct WErrorLog {
  std::string policy;
  std::string config_hash;
  std::vector<WErrorRow> rows;
};

/// Tracks how well the complement residual of held-out tasks matches the
/// generator's off-subspace variance as the run progresses.
WErrorLog w_error_curve(const ExperimentConfig& cfg, const SyntheticEnv& env);

/// Seed-mean of the relative error per task index.
std::vector<CurvePoint> w_error_summary(const WErrorLog& log);

}  // namespace metabandit
