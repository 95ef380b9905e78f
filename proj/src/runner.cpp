#include "metabandit/runner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "metabandit/metrics.hpp"

namespace metabandit {

namespace {

constexpr std::uint64_t kEnvStream = 0xE17;
constexpr std::uint64_t kPolicyStream = 0x90C;
constexpr std::uint64_t kHeldoutStream = 0x4E1;

}  // namespace

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::ProjectedLinUcb: return "p-linucb";
    case PolicyKind::ProjectedTs: return "p-ts";
    case PolicyKind::LinUcb: return "linucb";
    case PolicyKind::LinTs: return "ts";
    case PolicyKind::BiasedOful: return "b-oful";
    case PolicyKind::OracleLinUcb: return "oracle-ucb";
    case PolicyKind::OracleTs: return "oracle-ts";
  }
  throw std::invalid_argument("policy_name: unknown kind");
}

PolicyKind policy_from_name(const std::string& name) {
  if (name == "p-linucb") return PolicyKind::ProjectedLinUcb;
  if (name == "p-ts") return PolicyKind::ProjectedTs;
  if (name == "linucb") return PolicyKind::LinUcb;
  if (name == "ts") return PolicyKind::LinTs;
  if (name == "b-oful") return PolicyKind::BiasedOful;
  if (name == "oracle-ucb") return PolicyKind::OracleLinUcb;
  if (name == "oracle-ts") return PolicyKind::OracleTs;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

void ExperimentConfig::validate() const {
  policy_cfg.validate();
  if (num_tasks < 1) throw std::invalid_argument("config: num_tasks < 1");
  if (rounds_per_task < 1) {
    throw std::invalid_argument("config: rounds_per_task < 1");
  }
  if (seeds.empty()) throw std::invalid_argument("config: no seeds");
  if (rank_mode == RankMode::FixedRank && fixed_rank_p < 1) {
    throw std::invalid_argument("config: fixed rank must be >= 1");
  }
  if (heldout_draws < 1) throw std::invalid_argument("config: heldout_draws < 1");
  if (init_tasks < -1) throw std::invalid_argument("config: bad init_tasks");
}

namespace {

/// Sequence of tasks an experiment plays through for one seed.
class TaskStream {
 public:
  virtual ~TaskStream() = default;
  virtual int dim() const = 0;
  virtual int available_tasks() const = 0;
  virtual void start_task(int task_index) = 0;
  virtual ArmSet draw_arms() = 0;
  virtual double play(const ArmSet& arms, int chosen) = 0;
  virtual double regret(const ArmSet& arms, int chosen) const = 0;
  virtual const ProjectionPair* oracle_pair() const = 0;
};

class SyntheticStream final : public TaskStream {
 public:
  SyntheticStream(const SyntheticEnv& env, std::uint64_t seed)
      : env_(env), rng_(derive_seed(seed, kEnvStream)) {}

  int dim() const override { return env_.spec().dim; }
  int available_tasks() const override {
    return std::numeric_limits<int>::max();
  }
  void start_task(int) override { task_ = env_.gen_task(rng_); }
  ArmSet draw_arms() override { return env_.sample_contexts(rng_); }
  double play(const ArmSet& arms, int chosen) override {
    return env_.reward(task_, arms.contexts.row(chosen), rng_);
  }
  double regret(const ArmSet& arms, int chosen) const override {
    return env_.instant_regret(task_, arms, chosen);
  }
  const ProjectionPair* oracle_pair() const override {
    return &env_.true_pair();
  }

 private:
  const SyntheticEnv& env_;
  Rng rng_;
  SyntheticTask task_;
};

class MovieLensStream final : public TaskStream {
 public:
  MovieLensStream(const MovieLensEnv& env, std::uint64_t seed)
      : env_(env), rng_(derive_seed(seed, kEnvStream)) {
    order_.resize(static_cast<size_t>(env.num_users()));
    std::iota(order_.begin(), order_.end(), 0);
    for (int i = env.num_users() - 1; i > 0; --i) {
      std::swap(order_[static_cast<size_t>(i)],
                order_[static_cast<size_t>(rng_.uniform_int(i + 1))]);
    }
  }

  int dim() const override { return env_.dim(); }
  int available_tasks() const override { return env_.num_users(); }
  void start_task(int task_index) override {
    user_ = order_.at(static_cast<size_t>(task_index));
  }
  ArmSet draw_arms() override { return env_.user_round_arms(user_, rng_); }
  double play(const ArmSet& arms, int chosen) override {
    return env_.round_reward(user_, arms, chosen);
  }
  double regret(const ArmSet& arms, int chosen) const override {
    return env_.round_regret(user_, arms, chosen);
  }
  const ProjectionPair* oracle_pair() const override { return nullptr; }

 private:
  const MovieLensEnv& env_;
  Rng rng_;
  std::vector<int> order_;
  int user_ = 0;
};

bool updates_subspace(PolicyKind kind) {
  return kind == PolicyKind::ProjectedLinUcb ||
         kind == PolicyKind::ProjectedTs || kind == PolicyKind::BiasedOful;
}

int effective_init_tasks(const ExperimentConfig& cfg, int dim) {
  if (cfg.init_tasks >= 0) return cfg.init_tasks;
  if (cfg.policy == PolicyKind::ProjectedLinUcb ||
      cfg.policy == PolicyKind::ProjectedTs) {
    return dim;
  }
  return 0;
}

/// The projection pair and config the policy freezes for one task.
PolicyContext task_context(const ExperimentConfig& cfg,
                           const SubspaceModel& model, int task_1based,
                           int dim, const ProjectionPair* oracle) {
  switch (cfg.policy) {
    case PolicyKind::OracleLinUcb:
    case PolicyKind::OracleTs:
      if (oracle == nullptr) {
        throw std::invalid_argument(
            "oracle policies need an environment with a known subspace");
      }
      return make_oracle_context(*oracle, cfg.policy_cfg);
    case PolicyKind::BiasedOful:
      return make_biased_oful_context(model.running_mean(), cfg.policy_cfg);
    case PolicyKind::LinUcb:
    case PolicyKind::LinTs:
      return make_projected_context(identity_projection(dim), cfg.policy_cfg);
    case PolicyKind::ProjectedLinUcb:
    case PolicyKind::ProjectedTs:
      break;
  }
  if (task_1based <= effective_init_tasks(cfg, dim)) {
    return make_projected_context(identity_projection(dim), cfg.policy_cfg);
  }
  try {
    const int p = cfg.rank_mode == RankMode::FixedRank
                      ? std::min(cfg.fixed_rank_p, dim)
                      : select_rank(model);
    return make_projected_context(build_projections(model, p),
                                  cfg.policy_cfg);
  } catch (const DegenerateSpectrum&) {
    // No usable eigenvalue gap yet; run the task without a subspace.
    return make_projected_context(identity_projection(dim), cfg.policy_cfg);
  }
}

int select_arm(const ExperimentConfig& cfg, const PolicyContext& ctx,
               const ProjectedPolicyState& state, const ArmSet& arms,
               Rng& policy_rng) {
  switch (cfg.policy) {
    case PolicyKind::ProjectedLinUcb:
    case PolicyKind::OracleLinUcb:
    case PolicyKind::BiasedOful: {
      const double gamma =
          ctx.cfg.ucb_scale *
          confidence_radius(state, ctx.cfg, ctx.rank_p, ctx.rank_q);
      return ucb_select(state, arms, gamma);
    }
    case PolicyKind::ProjectedTs:
    case PolicyKind::OracleTs:
      return ts_select(state, arms, ctx.cfg, policy_rng);
    case PolicyKind::LinUcb:
      return classic_linucb_select(state.a_matrix(), state.b_prime(), arms,
                                   ctx.cfg);
    case PolicyKind::LinTs:
      return classic_ts_select(state.a_matrix(), state.b_prime(), arms,
                               ctx.cfg, policy_rng);
  }
  throw std::invalid_argument("select_arm: unknown policy");
}

/// Per-task hook invoked after each task completes; receives the subspace
/// model state with that task's estimate already absorbed (when the policy
/// maintains one).
using TaskHook = std::function<void(std::uint64_t seed, int task_1based,
                                    const SubspaceModel& model)>;

void run_seed(const ExperimentConfig& cfg, TaskStream& stream,
              std::uint64_t seed, RegretLog& log, const TaskHook& hook) {
  Rng policy_rng(derive_seed(seed, kPolicyStream));
  const int dim = stream.dim();
  SubspaceModel model(dim);
  const int tasks = std::min(cfg.num_tasks, stream.available_tasks());
  for (int t = 1; t <= tasks; ++t) {
    stream.start_task(t - 1);
    const PolicyContext ctx =
        task_context(cfg, model, t, dim, stream.oracle_pair());
    ProjectedPolicyState state(ctx.pair, ctx.cfg);
    double cum = 0.0;
    for (int k = 0; k < cfg.rounds_per_task; ++k) {
      ArmSet arms = stream.draw_arms();
      arms.validate();
      const int chosen = select_arm(cfg, ctx, state, arms, policy_rng);
      const double inst = stream.regret(arms, chosen);
      const double reward = stream.play(arms, chosen);
      cum += inst;
      state.update(arms.contexts.row(chosen), reward);
      log.rows.push_back(RegretRow{seed, t, k, inst, cum});
    }
    if (updates_subspace(cfg.policy)) {
      model.ccipca_update(state.ridge_estimate());
    }
    if (hook) hook(seed, t, model);
  }
}

template <typename MakeStream>
RegretLog run_with_streams(const ExperimentConfig& cfg,
                           const std::string& hash, MakeStream make_stream,
                           const TaskHook& hook = nullptr) {
  cfg.validate();
  RegretLog log;
  log.policy = policy_name(cfg.policy);
  log.config_hash = hash;
  log.rounds_per_task = cfg.rounds_per_task;
  for (const std::uint64_t seed : cfg.seeds) {
    const size_t mark = log.rows.size();
    try {
      auto stream = make_stream(seed);
      run_seed(cfg, *stream, seed, log, hook);
      log.seeds_completed.push_back(seed);
    } catch (const std::exception& e) {
      log.rows.resize(mark);  // drop the partial seed
      log.seeds_failed.emplace_back(seed, e.what());
    }
  }
  return log;
}

}  // namespace

RegretLog run_experiment(const ExperimentConfig& cfg,
                         const SyntheticEnv& env) {
  const std::string hash =
      config_hash(snapshot_config(cfg, &env.spec(), nullptr));
  return run_with_streams(cfg, hash, [&](std::uint64_t seed) {
    return std::make_unique<SyntheticStream>(env, seed);
  });
}

RegretLog run_experiment(const ExperimentConfig& cfg,
                         const MovieLensEnv& env) {
  if (cfg.policy == PolicyKind::ProjectedTs ||
      cfg.policy == PolicyKind::OracleLinUcb ||
      cfg.policy == PolicyKind::OracleTs) {
    throw std::invalid_argument(policy_name(cfg.policy) +
                                " is not defined on offline ratings data");
  }
  const std::string source = "movielens";
  const std::string hash = config_hash(snapshot_config(cfg, nullptr, &source));
  return run_with_streams(cfg, hash, [&](std::uint64_t seed) {
    return std::make_unique<MovieLensStream>(env, seed);
  });
}

std::vector<CurvePoint> expected_transfer_regret(const RegretLog& log) {
  std::vector<double> sum(static_cast<size_t>(log.rounds_per_task), 0.0);
  std::vector<double> sum_sq(static_cast<size_t>(log.rounds_per_task), 0.0);
  std::vector<long> count(static_cast<size_t>(log.rounds_per_task), 0);
  for (const RegretRow& row : log.rows) {
    const auto k = static_cast<size_t>(row.round);
    sum[k] += row.cum_regret;
    sum_sq[k] += row.cum_regret * row.cum_regret;
    count[k] += 1;
  }
  std::vector<CurvePoint> curve;
  curve.reserve(sum.size());
  for (size_t k = 0; k < sum.size(); ++k) {
    CurvePoint point;
    point.index = static_cast<int>(k);
    point.count = count[k];
    if (count[k] > 0) {
      point.mean = sum[k] / static_cast<double>(count[k]);
      if (count[k] > 1) {
        const double var =
            std::max(0.0, (sum_sq[k] - sum[k] * point.mean) /
                              static_cast<double>(count[k] - 1));
        point.stderr_value =
            std::sqrt(var / static_cast<double>(count[k]));
      }
    }
    curve.push_back(point);
  }
  return curve;
}

std::vector<CurvePoint> cumulative_regret_over_tasks(const RegretLog& log) {
  // Per-seed, per-task totals first.
  std::unordered_map<std::uint64_t, std::unordered_map<int, double>> totals;
  int max_task = 0;
  for (const RegretRow& row : log.rows) {
    totals[row.seed][row.task] += row.inst_regret;
    max_task = std::max(max_task, row.task);
  }
  std::vector<CurvePoint> curve(static_cast<size_t>(max_task));
  for (int t = 1; t <= max_task; ++t) {
    curve[static_cast<size_t>(t - 1)].index = t;
  }
  for (const std::uint64_t seed : log.seeds_completed) {
    double running = 0.0;
    const auto& by_task = totals[seed];
    for (int t = 1; t <= max_task; ++t) {
      const auto it = by_task.find(t);
      if (it == by_task.end()) break;
      running += it->second;
      CurvePoint& point = curve[static_cast<size_t>(t - 1)];
      point.mean += running;
      point.stderr_value += running * running;  // reused as sum of squares
      point.count += 1;
    }
  }
  for (CurvePoint& point : curve) {
    if (point.count > 0) {
      const double mean = point.mean / static_cast<double>(point.count);
      double se = 0.0;
      if (point.count > 1) {
        const double var = std::max(
            0.0, (point.stderr_value - point.mean * mean) /
                     static_cast<double>(point.count - 1));
        se = std::sqrt(var / static_cast<double>(point.count));
      }
      point.mean = mean;
      point.stderr_value = se;
    }
  }
  return curve;
}

std::vector<double> seed_total_regret(const RegretLog& log) {
  std::unordered_map<std::uint64_t, double> totals;
  for (const RegretRow& row : log.rows) totals[row.seed] += row.inst_regret;
  std::vector<double> result;
  result.reserve(log.seeds_completed.size());
  for (const std::uint64_t seed : log.seeds_completed) {
    result.push_back(totals[seed]);
  }
  return result;
}

std::vector<SweepPoint> rank_sweep(const ExperimentConfig& cfg,
                                   const SyntheticEnv& env,
                                   const std::vector<int>& q_values) {
  std::vector<SweepPoint> points;
  points.reserve(q_values.size());
  for (const int q : q_values) {
    if (q < 0 || q >= env.spec().dim) {
      throw std::invalid_argument("rank_sweep: q out of range");
    }
    ExperimentConfig point_cfg = cfg;
    if (q == 0) {
      point_cfg.policy = PolicyKind::LinUcb;
    } else {
      point_cfg.policy = PolicyKind::ProjectedLinUcb;
      point_cfg.rank_mode = RankMode::FixedRank;
      point_cfg.fixed_rank_p = env.spec().dim - q;
    }
    const RegretLog log = run_experiment(point_cfg, env);
    const std::vector<double> totals = seed_total_regret(log);
    SweepPoint point;
    point.complement_rank = q;
    if (!totals.empty()) {
      const double mean =
          std::accumulate(totals.begin(), totals.end(), 0.0) /
          static_cast<double>(totals.size());
      double var = 0.0;
      for (const double v : totals) var += (v - mean) * (v - mean);
      point.mean_total = mean;
      if (totals.size() > 1) {
        var /= static_cast<double>(totals.size() - 1);
        point.stderr_value =
            std::sqrt(var / static_cast<double>(totals.size()));
      }
    }
    points.push_back(point);
  }
  return points;
}

WErrorLog w_error_curve(const ExperimentConfig& cfg, const SyntheticEnv& env) {
  if (!(env.spec().task_variance > 0.0)) {
    throw std::invalid_argument(
        "w_error_curve: needs a positive off-subspace task variance");
  }
  if (!updates_subspace(cfg.policy)) {
    throw std::invalid_argument(
        "w_error_curve: policy does not maintain a running subspace");
  }
  WErrorLog out;
  out.policy = policy_name(cfg.policy);

  // Pull the per-seed heldout stream out of the hook so tasks consume it
  // in order.
  std::unordered_map<std::uint64_t, Rng> heldout;
  const auto hook = [&](std::uint64_t seed, int task, const SubspaceModel& model) {
    Rng& rng =
        heldout.try_emplace(seed, derive_seed(seed, kHeldoutStream))
            .first->second;
    const int dim = env.spec().dim;

    bool in_init = false;
    ProjectionPair pair;
    if (cfg.policy == PolicyKind::BiasedOful) {
      pair = complement_projection(model.running_mean());
    } else {
      // The pair the policy would freeze for the following task.
      const PolicyContext ctx =
          task_context(cfg, model, task + 1, dim, &env.true_pair());
      pair = ctx.pair;
      in_init = task + 1 <= effective_init_tasks(cfg, dim);
    }

    double mean_w = 0.0;
    for (int i = 0; i < cfg.heldout_draws; ++i) {
      const SyntheticTask draw = env.gen_task(rng);
      mean_w += projection_error_metric(pair, draw.theta_star,
                                        model.running_mean());
    }
    mean_w /= static_cast<double>(cfg.heldout_draws);
    const double rel =
        std::abs(mean_w * mean_w / env.spec().task_variance - 1.0);
    out.rows.push_back(WErrorRow{seed, task, rel, in_init});
  };

  const std::string hash =
      config_hash(snapshot_config(cfg, &env.spec(), nullptr));
  out.config_hash = hash;
  run_with_streams(cfg, hash, [&](std::uint64_t seed) {
    return std::make_unique<SyntheticStream>(env, seed);
  }, hook);
  return out;
}

std::vector<CurvePoint> w_error_summary(const WErrorLog& log) {
  int max_task = 0;
  for (const WErrorRow& row : log.rows) max_task = std::max(max_task, row.task);
  std::vector<CurvePoint> curve(static_cast<size_t>(max_task));
  for (int t = 1; t <= max_task; ++t) curve[static_cast<size_t>(t - 1)].index = t;
  for (const WErrorRow& row : log.rows) {
    CurvePoint& point = curve[static_cast<size_t>(row.task - 1)];
    point.mean += row.rel_error;
    point.stderr_value += row.rel_error * row.rel_error;
    point.count += 1;
  }
  for (CurvePoint& point : curve) {
    if (point.count > 0) {
      const double mean = point.mean / static_cast<double>(point.count);
      double se = 0.0;
      if (point.count > 1) {
        const double var = std::max(
            0.0, (point.stderr_value - point.mean * mean) /
                     static_cast<double>(point.count - 1));
        se = std::sqrt(var / static_cast<double>(point.count));
      }
      point.mean = mean;
      point.stderr_value = se;
    }
  }
  return curve;
}

}  // namespace metabandit
