// Command-line front end: configures experiments, runs them, and writes
// CSV/manifest outputs. Exit codes: 0 ok, 1 failed self-check, 2 bad
// flags or configuration, 3 data or IO errors.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "metabandit/metrics.hpp"

using namespace metabandit;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string join_command(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    const std::string arg = argv[i];
    if (arg.find(' ') != std::string::npos) {
      out += '"' + arg + '"';
    } else {
      out += arg;
    }
  }
  return out;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t");
  return text.substr(first, last - first + 1);
}

// Flat key=value config file: keys are the long flag names without dashes
// ("d=30", "policy=p-linucb", "seeds=1,2,3"). '#' starts a comment. Values
// only fill options the command line left unset.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      throw std::invalid_argument("config " + where + ": expected key=value");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    CLI::Option* op = cmd->get_option_no_throw("--" + key);
    if (op == nullptr) {
      throw std::invalid_argument("config " + where + ": unknown key '" +
                                  key + "'");
    }
    if (op->count() > 0) continue;
    op->add_result(value);
    try {
      op->run_callback();
    } catch (const CLI::Error& e) {
      throw std::invalid_argument("config " + where + ": bad value for '" +
                                  key + "': " + e.what());
    }
  }
}

struct EnvOptions {
  SyntheticSpec spec;

  void attach(CLI::App* cmd) {
    cmd->add_option("--d", spec.dim, "ambient dimension");
    cmd->add_option("--p-true", spec.true_rank, "true subspace rank");
    cmd->add_option("--var-rho", spec.task_variance,
                    "total off-subspace task variance");
    cmd->add_option("--arms", spec.arms_per_round, "arms per round");
    cmd->add_option("--noise-std", spec.noise_std, "reward noise std");
    cmd->add_option("--v-bound", spec.param_scale,
                    "norm bound V on task parameters");
    cmd->add_option("--subspace-seed", spec.subspace_seed,
                    "seed of the hidden subspace draw");
    cmd->add_option("--context-seed", spec.context_cov_seed,
                    "seed of the context covariance draw");
  }
};

// Run-shape flags shared by the experiment subcommands. Policy constants
// default to the analytical prescriptions for the chosen horizon and are
// overridden individually.
struct RunOptions {
  int tasks = 100;
  int rounds = 250;
  std::string policy = "p-linucb";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string rank_mode = "auto";
  int fixed_p = 0;
  int init_tasks = -1;
  int heldout = 200;
  std::string out_dir = "out";
  std::string config_path;

  double lambda1 = 0, lambda2 = 0, lambda_ridge = 0, delta = 0, w_bound = 0,
         alpha = 0, ucb_scale = 1, ts_scale = 1;
  CLI::Option* o_lambda1 = nullptr;
  CLI::Option* o_lambda2 = nullptr;
  CLI::Option* o_lambda_ridge = nullptr;
  CLI::Option* o_delta = nullptr;
  CLI::Option* o_w_bound = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_ucb_scale = nullptr;
  CLI::Option* o_ts_scale = nullptr;

  void attach(CLI::App* cmd, bool with_policy, bool with_rank_controls) {
    cmd->add_option("--tasks", tasks, "number of sequential tasks");
    cmd->add_option("--rounds", rounds, "rounds per task");
    if (with_policy) {
      cmd->add_option("--policy", policy,
                      "p-linucb|p-ts|linucb|ts|b-oful|oracle-ucb|oracle-ts");
    }
    cmd->add_option("--seeds", seeds, "run seeds")->delimiter(',');
    if (with_rank_controls) {
      cmd->add_option("--rank-mode", rank_mode,
                      "subspace rank selection: auto (eigengap) or fixed")
          ->check(CLI::IsMember({"auto", "fixed"}));
      cmd->add_option("--fixed-p", fixed_p,
                      "subspace rank when --rank-mode fixed");
      cmd->add_option("--init-tasks", init_tasks,
                      "unbiased warm-up tasks; -1 means one per dimension");
    }
    cmd->add_option("--out", out_dir, "output directory");

    o_lambda1 = cmd->add_option("--lambda1", lambda1,
                                "complement regularization weight");
    o_lambda2 =
        cmd->add_option("--lambda2", lambda2, "subspace regularization weight");
    o_lambda_ridge = cmd->add_option("--lambda-ridge", lambda_ridge,
                                     "plain ridge weight");
    o_delta = cmd->add_option("--delta", delta, "confidence level");
    o_w_bound = cmd->add_option("--w-bound", w_bound,
                                "bound on the complement residual");
    o_alpha = cmd->add_option("--alpha", alpha, "posterior inflation control");
    o_ucb_scale = cmd->add_option("--ucb-scale", ucb_scale,
                                  "multiplier on the optimism bonus");
    o_ts_scale = cmd->add_option("--ts-scale", ts_scale,
                                 "multiplier on the posterior width");
    cmd->add_option("--config", config_path,
                    "flat key=value file; flags take precedence");
  }

  ExperimentConfig to_config(double v_bound, int dim) const {
    ExperimentConfig cfg;
    cfg.policy = policy_from_name(policy);
    cfg.num_tasks = tasks;
    cfg.rounds_per_task = rounds;
    cfg.policy_cfg = PolicyConfig::defaults_for(rounds, v_bound, dim);
    if (o_lambda1->count() > 0) cfg.policy_cfg.lambda1 = lambda1;
    if (o_lambda2->count() > 0) cfg.policy_cfg.lambda2 = lambda2;
    if (o_lambda_ridge->count() > 0) cfg.policy_cfg.lambda_ridge = lambda_ridge;
    if (o_delta->count() > 0) cfg.policy_cfg.delta = delta;
    if (o_w_bound->count() > 0) cfg.policy_cfg.w_bound = w_bound;
    if (o_alpha->count() > 0) cfg.policy_cfg.alpha = alpha;
    if (o_ucb_scale->count() > 0) cfg.policy_cfg.ucb_scale = ucb_scale;
    if (o_ts_scale->count() > 0) cfg.policy_cfg.ts_scale = ts_scale;
    cfg.rank_mode =
        rank_mode == "fixed" ? RankMode::FixedRank : RankMode::EigengapAuto;
    cfg.fixed_rank_p = fixed_p;
    if (cfg.rank_mode == RankMode::FixedRank &&
        (fixed_p < 1 || fixed_p > dim)) {
      throw std::invalid_argument("--fixed-p must lie in 1..d");
    }
    cfg.init_tasks = init_tasks;
    cfg.seeds = seeds;
    cfg.heldout_draws = heldout;
    cfg.validate();
    return cfg;
  }
};

RunManifest make_manifest(const ConfigSnapshot& snap,
                          const std::string& command,
                          const std::string& policy, double wall_seconds) {
  RunManifest m;
  m.config = snap;
  m.hash = config_hash(snap);
  m.command = command;
  m.policy = policy;
  m.wall_seconds = wall_seconds;
  m.timestamp_utc = utc_timestamp();
  return m;
}

int run_regret_command(const ExperimentConfig& cfg, const RegretLog& log,
                       const ConfigSnapshot& snap, const std::string& out_dir,
                       const std::string& command, double wall_seconds) {
  std::filesystem::create_directories(out_dir);
  const std::string raw_path = out_dir + "/raw.csv";
  const std::string summary_path = out_dir + "/summary.csv";
  const std::string manifest_path = out_dir + "/manifest.json";

  RegretLog stamped = log;
  stamped.config_hash = config_hash(snap);
  write_regret_csv(stamped, raw_path);
  write_regret_summary_csv(stamped, summary_path);

  RunManifest m =
      make_manifest(snap, command, policy_name(cfg.policy), wall_seconds);
  m.outputs = {raw_path, summary_path, manifest_path};
  m.seeds_completed = log.seeds_completed;
  m.seeds_failed = log.seeds_failed;
  write_manifest(m, manifest_path);

  std::printf("wrote %s, %s, %s (%zu rows, %zu/%zu seeds)\n", raw_path.c_str(),
              summary_path.c_str(), manifest_path.c_str(), log.rows.size(),
              log.seeds_completed.size(),
              log.seeds_completed.size() + log.seeds_failed.size());
  for (const auto& [seed, why] : log.seeds_failed) {
    std::fprintf(stderr, "seed %llu failed: %s\n",
                 static_cast<unsigned long long>(seed), why.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// check: fast self-contained oracles for the core numerics.

bool check_estimator_against_brute_force() {
  Rng rng(20240501);
  const std::vector<double> ratios = {1.0, 10.0, 100.0};
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6
    const int p = static_cast<int>(rng.uniform_int(d + 1));  // 0..d
    const int k = 1 + static_cast<int>(rng.uniform_int(30));

    const Eigen::VectorXd mean = rng.gaussian_vector(d);
    ProjectionPair pair;
    if (p == 0) {
      pair = complement_projection(mean);
    } else {
      Eigen::MatrixXd basis(d, p);
      for (int j = 0; j < p; ++j) basis.col(j) = rng.gaussian_vector(d);
      pair = projection_from_basis(basis, mean);
    }

    PolicyConfig cfg;
    cfg.lambda2 = 0.5 + rng.uniform();
    cfg.lambda1 =
        cfg.lambda2 * ratios[rng.uniform_int(static_cast<int>(ratios.size()))];
    cfg.lambda_ridge = 1.0;
    cfg.horizon = k;

    ProjectedPolicyState state(pair, cfg);
    Eigen::MatrixXd xs(k, d);
    Eigen::VectorXd rs(k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd x = rng.gaussian_vector(d);
      const double norm = x.norm();
      if (norm > 1.0) x /= norm;
      const double r = rng.gaussian();
      state.update(x, r);
      xs.row(i) = x.transpose();
      rs(i) = r;
    }

    // Independent minimizer of the penalized least-squares objective via a
    // stacked QR solve; no normal equations, no shared code path.
    Eigen::MatrixXd stacked(k + 2 * d, d);
    Eigen::VectorXd target(k + 2 * d);
    stacked.topRows(k) = xs;
    target.head(k) = rs;
    stacked.middleRows(k, d) = std::sqrt(cfg.lambda1) * pair.p_perp;
    target.segment(k, d) = std::sqrt(cfg.lambda1) * pair.bias_w;
    stacked.bottomRows(d) = std::sqrt(cfg.lambda2) * pair.p_hat;
    target.tail(d).setZero();
    const Eigen::VectorXd direct =
        stacked.colPivHouseholderQr().solve(target);

    const double err = (state.theta_hat() - direct).cwiseAbs().maxCoeff();
    if (err > worst) worst = err;
  }
  const bool ok = worst <= 1e-8;
  std::printf("[%s] estimator matches the stacked least-squares minimizer "
              "(300 instances, max err %.2e)\n",
              ok ? "PASS" : "FAIL", worst);
  return ok;
}

bool check_streaming_pca_against_batch() {
  const int d = 10;
  const int t = 2000;
  const int p = 2;
  Eigen::VectorXd variances(d);
  variances(0) = 9.0;
  for (int j = 1; j < d; ++j) variances(j) = variances(j - 1) / 4.0;

  double total = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(1000 + s);
    const Eigen::MatrixXd q = random_orthogonal(d, rng);
    SubspaceModel model(d);
    Eigen::MatrixXd samples(t, d);
    for (int i = 0; i < t; ++i) {
      const Eigen::VectorXd theta =
          q * variances.cwiseSqrt().cwiseProduct(rng.gaussian_vector(d));
      model.ccipca_update(theta);
      samples.row(i) = theta.transpose();
    }

    const Eigen::RowVectorXd mu = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mu;
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(t - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::MatrixXd top = eig.eigenvectors().rightCols(p);
    const Eigen::MatrixXd batch_proj = top * top.transpose();

    const ProjectionPair pair = build_projections(model, p);
    total += (pair.p_hat - batch_proj).norm();
  }
  const double avg = total / seeds;
  const bool ok = avg <= 0.2;
  std::printf("[%s] streaming PCA tracks batch PCA (d=10, t=2000, rank 2, "
              "mean error %.3f)\n",
              ok ? "PASS" : "FAIL", avg);
  return ok;
}

bool check_projection_invariants() {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(9));  // 2..10
    SubspaceModel model(d);
    const int updates = d + 1 + static_cast<int>(rng.uniform_int(30));
    for (int i = 0; i < updates; ++i) {
      model.ccipca_update(rng.gaussian_vector(d));
    }
    for (int p = 1; p <= d; ++p) {
      const ProjectionPair pair = build_projections(model, p);
      const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
      worst = std::max(worst,
                       (pair.p_hat * pair.p_hat - pair.p_hat).cwiseAbs().maxCoeff());
      worst = std::max(
          worst, (pair.p_hat - pair.p_hat.transpose()).cwiseAbs().maxCoeff());
      worst = std::max(
          worst,
          (pair.p_hat + pair.p_perp - identity).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(pair.p_hat.trace() - p));
    }
  }
  const bool ok = worst <= 1e-6;
  std::printf("[%s] projection pairs are idempotent, symmetric, and "
              "complementary (worst deviation %.2e)\n",
              ok ? "PASS" : "FAIL", worst);
  return ok;
}

int run_check() {
  int failures = 0;
  if (!check_estimator_against_brute_force()) ++failures;
  if (!check_streaming_pca_against_batch()) ++failures;
  if (!check_projection_invariants()) ++failures;
  std::printf(failures == 0 ? "all checks passed\n"
                            : "%d check(s) failed\n",
              failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning linear bandit simulator"};
  app.require_subcommand(1);

  CLI::App* synth = app.add_subcommand(
      "synth", "run one policy on the synthetic task stream");
  EnvOptions synth_env;
  synth_env.attach(synth);
  RunOptions synth_run;
  synth_run.attach(synth, /*with_policy=*/true, /*with_rank_controls=*/true);

  CLI::App* movielens = app.add_subcommand(
      "movielens", "run one policy over MovieLens users");
  RunOptions ml_run;
  ml_run.attach(movielens, /*with_policy=*/true, /*with_rank_controls=*/true);
  std::string data_path;
  std::string group = "all";
  int ml_arms = 25;
  double ml_v_bound = 1.0;
  movielens->add_option("--data-path", data_path,
                        "directory holding movies.dat/ratings.dat/users.dat")
      ->envname("MOVIELENS_PATH");
  movielens->add_option("--group", group,
                        "user filter: all, M, F, or an occupation id");
  movielens->add_option("--arms", ml_arms, "arms per round");
  movielens->add_option("--v-bound", ml_v_bound,
                        "norm bound assumed by the policies");

  CLI::App* sweep = app.add_subcommand(
      "rank-sweep", "total regret as a function of the complement rank q");
  EnvOptions sweep_env;
  sweep_env.attach(sweep);
  RunOptions sweep_run;
  sweep_run.attach(sweep, /*with_policy=*/false, /*with_rank_controls=*/false);
  std::vector<int> q_values;
  sweep->add_option("--q-values", q_values,
                    "complement ranks to test; default 0..d-1")
      ->delimiter(',');

  CLI::App* werror = app.add_subcommand(
      "w-error", "track the residual-variance match on held-out tasks");
  EnvOptions werror_env;
  werror_env.attach(werror);
  RunOptions werror_run;
  werror_run.attach(werror, /*with_policy=*/true, /*with_rank_controls=*/true);
  werror->add_option("--heldout", werror_run.heldout,
                     "held-out tasks scored per update");

  CLI::App* check =
      app.add_subcommand("check", "run the built-in numerical self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = join_command(argc, argv);
  try {
    if (*check) return run_check();

    if (*synth) {
      if (!synth_run.config_path.empty()) {
        apply_config_file(synth, synth_run.config_path);
      }
      const ExperimentConfig cfg = synth_run.to_config(
          synth_env.spec.param_scale, synth_env.spec.dim);
      const SyntheticEnv env(synth_env.spec);
      const auto start = std::chrono::steady_clock::now();
      const RegretLog log = run_experiment(cfg, env);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      const ConfigSnapshot snap = snapshot_config(cfg, &synth_env.spec, nullptr);
      return run_regret_command(cfg, log, snap, synth_run.out_dir, command,
                                wall);
    }

    if (*movielens) {
      if (!ml_run.config_path.empty()) {
        apply_config_file(movielens, ml_run.config_path);
      }
      if (data_path.empty()) {
        std::fprintf(stderr,
                     "missing --data-path (or MOVIELENS_PATH) for the "
                     "MovieLens tables\n");
        return 2;
      }
      const ExperimentConfig cfg = ml_run.to_config(ml_v_bound, kGenreCount);
      const MovieLensEnv env = MovieLensEnv::load(data_path, group, ml_arms);
      const auto start = std::chrono::steady_clock::now();
      const RegretLog log = run_experiment(cfg, env);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      const std::string label = "movielens:" + (group.empty() ? "all" : group);
      const ConfigSnapshot snap = snapshot_config(cfg, nullptr, &label);
      return run_regret_command(cfg, log, snap, ml_run.out_dir, command, wall);
    }

    if (*sweep) {
      if (!sweep_run.config_path.empty()) {
        apply_config_file(sweep, sweep_run.config_path);
      }
      ExperimentConfig cfg =
          sweep_run.to_config(sweep_env.spec.param_scale, sweep_env.spec.dim);
      const SyntheticEnv env(sweep_env.spec);
      std::vector<int> qs = q_values;
      if (qs.empty()) {
        qs.resize(sweep_env.spec.dim);
        std::iota(qs.begin(), qs.end(), 0);
      }
      const auto start = std::chrono::steady_clock::now();
      const std::vector<SweepPoint> points = rank_sweep(cfg, env, qs);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();

      std::filesystem::create_directories(sweep_run.out_dir);
      const std::string sweep_path = sweep_run.out_dir + "/sweep.csv";
      const std::string manifest_path = sweep_run.out_dir + "/manifest.json";
      write_sweep_csv(points, sweep_env.spec.dim, "p-linucb", sweep_path);
      const ConfigSnapshot snap = snapshot_config(cfg, &sweep_env.spec, nullptr);
      RunManifest m = make_manifest(snap, command, "p-linucb", wall);
      m.outputs = {sweep_path, manifest_path};
      m.seeds_completed = cfg.seeds;
      write_manifest(m, manifest_path);
      std::printf("wrote %s, %s (%zu sweep points)\n", sweep_path.c_str(),
                  manifest_path.c_str(), points.size());
      return 0;
    }

    if (*werror) {
      if (!werror_run.config_path.empty()) {
        apply_config_file(werror, werror_run.config_path);
      }
      const ExperimentConfig cfg = werror_run.to_config(
          werror_env.spec.param_scale, werror_env.spec.dim);
      const SyntheticEnv env(werror_env.spec);
      const auto start = std::chrono::steady_clock::now();
      const WErrorLog log = w_error_curve(cfg, env);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();

      std::filesystem::create_directories(werror_run.out_dir);
      const std::string raw_path = werror_run.out_dir + "/werror.csv";
      const std::string summary_path =
          werror_run.out_dir + "/werror_summary.csv";
      const std::string manifest_path = werror_run.out_dir + "/manifest.json";
      write_werror_csv(log, raw_path);
      write_werror_summary_csv(log, summary_path);
      const ConfigSnapshot snap =
          snapshot_config(cfg, &werror_env.spec, nullptr);
      RunManifest m =
          make_manifest(snap, command, policy_name(cfg.policy), wall);
      m.outputs = {raw_path, summary_path, manifest_path};
      m.seeds_completed = cfg.seeds;
      write_manifest(m, manifest_path);
      std::printf("wrote %s, %s, %s (%zu rows)\n", raw_path.c_str(),
                  summary_path.c_str(), manifest_path.c_str(),
                  log.rows.size());
      return 0;
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const MissingGenre& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const EmptyGroup& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
