#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "metabandit/metrics.hpp"

using namespace metabandit;

namespace {

const char* kDir = "/tmp/mb_metrics_test";

std::string path_in_dir(const std::string& name) {
  REQUIRE(std::system(("mkdir -p " + std::string(kDir)).c_str()) == 0);
  return std::string(kDir) + "/" + name;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

RegretLog sample_log() {
  RegretLog log;
  log.policy = "p-linucb";
  log.config_hash = "0011223344556677";
  log.rounds_per_task = 2;
  log.seeds_completed = {7, 3};
  log.rows = {
      {7, 1, 0, 0.1, 0.1},
      {7, 1, 1, 1.0 / 3.0, 0.1 + 1.0 / 3.0},
      {3, 1, 0, 1e-15, 1e-15},
      {3, 1, 1, 12345.678901234567, 12345.678901234567},
  };
  return log;
}

ExperimentConfig sample_config() {
  ExperimentConfig cfg;
  cfg.policy = PolicyKind::ProjectedLinUcb;
  cfg.num_tasks = 4;
  cfg.rounds_per_task = 6;
  cfg.policy_cfg = PolicyConfig::defaults_for(6, 1.0, 5);
  cfg.seeds = {1, 2};
  return cfg;
}

}  // namespace

TEST_CASE("seventeen significant digits round-trip every double exactly") {
  const std::vector<double> values = {
      0.0,   0.1,    1.0 / 3.0,           1e-300,
      1e300, -2.5e7, 0.30000000000000004, 123456789.12345679,
      -1.0,  5e-324, 1.7976931348623157e308};
  for (const double v : values) {
    const std::string text = format_double17(v);
    const double back = std::strtod(text.c_str(), nullptr);
    std::uint64_t a, b;
    std::memcpy(&a, &v, sizeof(a));
    std::memcpy(&b, &back, sizeof(b));
    CHECK(a == b);
  }
}

TEST_CASE("regret CSV round-trips rows bit-exactly") {
  const RegretLog log = sample_log();
  const std::string path = path_in_dir("roundtrip.csv");
  write_regret_csv(log, path);

  const RegretLog back = read_regret_csv(path);
  CHECK(back.policy == log.policy);
  CHECK(back.config_hash.empty());  // hash is carried by the manifest
  CHECK(back.rounds_per_task == 2);
  REQUIRE(back.seeds_completed == std::vector<std::uint64_t>{7, 3});
  REQUIRE(back.rows.size() == log.rows.size());
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    CHECK(back.rows[i].seed == log.rows[i].seed);
    CHECK(back.rows[i].task == log.rows[i].task);
    CHECK(back.rows[i].round == log.rows[i].round);
    CHECK(back.rows[i].inst_regret == log.rows[i].inst_regret);
    CHECK(back.rows[i].cum_regret == log.rows[i].cum_regret);
  }

  const std::vector<std::string> lines = read_lines(path);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "policy,seed,task,round,inst_regret,cum_regret");
  CHECK(lines[1] == "p-linucb,7,1,0,0.10000000000000001,0.10000000000000001");
}

TEST_CASE("CSV reader tolerates CRLF and skips blank lines") {
  const std::string path = path_in_dir("crlf.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "policy,seed,task,round,inst_regret,cum_regret\r\n"
        << "\r\n"
        << "ts,5,1,0,0.5,0.5\r\n";
  }
  const RegretLog log = read_regret_csv(path);
  CHECK(log.policy == "ts");
  REQUIRE(log.rows.size() == 1);
  CHECK(log.rows[0].seed == 5);
  CHECK(log.rows[0].cum_regret == 0.5);
}

TEST_CASE("CSV reader rejects malformed input") {
  const std::string bad_header = path_in_dir("bad_header.csv");
  {
    std::ofstream out(bad_header, std::ios::binary);
    out << "policy,seed,task\nlinucb,1,1\n";
  }
  CHECK_THROWS_AS(read_regret_csv(bad_header), std::runtime_error);

  const std::string short_row = path_in_dir("short_row.csv");
  {
    std::ofstream out(short_row, std::ios::binary);
    out << "policy,seed,task,round,inst_regret,cum_regret\n"
        << "linucb,1,1,0,0.5\n";
  }
  CHECK_THROWS_AS(read_regret_csv(short_row), std::runtime_error);

  const std::string mixed = path_in_dir("mixed.csv");
  {
    std::ofstream out(mixed, std::ios::binary);
    out << "policy,seed,task,round,inst_regret,cum_regret\n"
        << "linucb,1,1,0,0.5,0.5\n"
        << "ts,1,1,1,0.5,1\n";
  }
  CHECK_THROWS_AS(read_regret_csv(mixed), std::runtime_error);

  CHECK_THROWS_AS(read_regret_csv(path_in_dir("missing.csv")),
                  std::runtime_error);
}

TEST_CASE("summary file agrees with the aggregator and an external anchor") {
  RegretLog log;
  log.policy = "oracle-ucb";
  log.rounds_per_task = 2;
  log.seeds_completed = {1, 2};
  // Round-0 cumulative values 1,2,3,4 across the four seed/task cells.
  log.rows = {
      {1, 1, 0, 1.0, 1.0}, {1, 1, 1, 1.0, 2.0}, {1, 2, 0, 2.0, 2.0},
      {1, 2, 1, 1.0, 3.0}, {2, 1, 0, 3.0, 3.0}, {2, 1, 1, 0.0, 3.0},
      {2, 2, 0, 4.0, 4.0}, {2, 2, 1, 1.0, 5.0},
  };
  const std::string path = path_in_dir("summary.csv");
  write_regret_summary_csv(log, path);

  const std::vector<std::string> lines = read_lines(path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "policy,round,mean_cum_regret,stderr");

  const std::vector<CurvePoint> curve = expected_transfer_regret(log);
  REQUIRE(curve.size() == 2);
  for (int k = 0; k < 2; ++k) {
    std::ostringstream expect;
    expect << "oracle-ucb," << k << ',' << format_double17(curve[k].mean)
           << ',' << format_double17(curve[k].stderr_value);
    CHECK(lines[1 + k] == expect.str());
  }
  CHECK(curve[0].mean == doctest::Approx(2.5).epsilon(1e-14));
  // Sample variance of {1,2,3,4} is 5/3; four cells.
  CHECK(curve[0].stderr_value ==
        doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-14));
}

TEST_CASE("empty logs still produce header-only files") {
  RegretLog log;
  log.policy = "linucb";
  const std::string raw = path_in_dir("empty_raw.csv");
  const std::string summary = path_in_dir("empty_summary.csv");
  write_regret_csv(log, raw);
  write_regret_summary_csv(log, summary);
  CHECK(read_lines(raw) ==
        std::vector<std::string>{"policy,seed,task,round,inst_regret,cum_regret"});
  CHECK(read_lines(summary) ==
        std::vector<std::string>{"policy,round,mean_cum_regret,stderr"});
  CHECK(read_regret_csv(raw).rows.empty());
}

TEST_CASE("sweep and w-error files carry the documented columns") {
  const std::vector<SweepPoint> points = {{0, 10.0, 1.0}, {3, 4.5, 0.25}};
  const std::string sweep_path = path_in_dir("sweep.csv");
  write_sweep_csv(points, 8, "p-linucb", sweep_path);
  const std::vector<std::string> sweep_lines = read_lines(sweep_path);
  REQUIRE(sweep_lines.size() == 3);
  CHECK(sweep_lines[0] == "policy,q,p,mean_total_regret,stderr");
  CHECK(sweep_lines[1] == "p-linucb,0,8,10,1");
  CHECK(sweep_lines[2] == "p-linucb,3,5,4.5,0.25");

  WErrorLog werr;
  werr.policy = "p-linucb";
  werr.rows = {{1, 1, 1.0, true}, {1, 2, 0.25, false}, {2, 1, 1.0, true},
               {2, 2, 0.75, false}};
  const std::string werr_path = path_in_dir("werr.csv");
  write_werror_csv(werr, werr_path);
  const std::vector<std::string> werr_lines = read_lines(werr_path);
  REQUIRE(werr_lines.size() == 5);
  CHECK(werr_lines[0] == "policy,seed,task,rel_error,in_init");
  CHECK(werr_lines[1] == "p-linucb,1,1,1,1");
  CHECK(werr_lines[2] == "p-linucb,1,2,0.25,0");

  const std::string wsum_path = path_in_dir("werr_summary.csv");
  write_werror_summary_csv(werr, wsum_path);
  const std::vector<std::string> wsum_lines = read_lines(wsum_path);
  REQUIRE(wsum_lines.size() == 3);
  CHECK(wsum_lines[0] == "policy,task,mean_rel_error,stderr");
  CHECK(wsum_lines[1] == "p-linucb,1,1,0");
  // Mean of {0.25, 0.75} is 0.5 with stderr 0.25.
  CHECK(wsum_lines[2] == "p-linucb,2,0.5,0.25");
}

TEST_CASE("equal setups hash equal") {
  const ExperimentConfig cfg = sample_config();
  const SyntheticSpec spec;
  const std::string a = config_hash(snapshot_config(cfg, &spec, nullptr));
  const std::string b = config_hash(snapshot_config(cfg, &spec, nullptr));
  CHECK(a == b);
  CHECK(a.size() == 16);
}

TEST_CASE("any changed field changes the hash") {
  const ExperimentConfig base_cfg = sample_config();
  const SyntheticSpec base_spec;
  const std::string base =
      config_hash(snapshot_config(base_cfg, &base_spec, nullptr));

  std::vector<std::string> variants;
  auto with_cfg = [&](auto mutate) {
    ExperimentConfig cfg = base_cfg;
    mutate(cfg);
    variants.push_back(config_hash(snapshot_config(cfg, &base_spec, nullptr)));
  };
  auto with_spec = [&](auto mutate) {
    SyntheticSpec spec = base_spec;
    mutate(spec);
    variants.push_back(
        config_hash(snapshot_config(base_cfg, &spec, nullptr)));
  };

  with_cfg([](ExperimentConfig& c) { c.policy = PolicyKind::LinUcb; });
  with_cfg([](ExperimentConfig& c) { c.num_tasks = 5; });
  with_cfg([](ExperimentConfig& c) { c.rounds_per_task = 7; });
  with_cfg([](ExperimentConfig& c) { c.rank_mode = RankMode::FixedRank; });
  with_cfg([](ExperimentConfig& c) { c.fixed_rank_p = 3; });
  with_cfg([](ExperimentConfig& c) { c.init_tasks = 2; });
  with_cfg([](ExperimentConfig& c) { c.heldout_draws = 50; });
  with_cfg([](ExperimentConfig& c) { c.seeds = {1, 2, 3}; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.lambda1 *= 2; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.lambda2 *= 2; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.lambda_ridge *= 2; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.delta *= 0.5; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.v_bound = 2.0; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.w_bound = 0.5; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.alpha = 0.3; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.ucb_scale = 0.05; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.ts_scale = 0.01; });
  with_cfg([](ExperimentConfig& c) { c.policy_cfg.horizon = 9; });
  with_spec([](SyntheticSpec& s) { s.dim = 12; });
  with_spec([](SyntheticSpec& s) { s.true_rank = 4; });
  with_spec([](SyntheticSpec& s) { s.arms_per_round = 13; });
  with_spec([](SyntheticSpec& s) { s.task_variance = 0.5; });
  with_spec([](SyntheticSpec& s) { s.param_scale = 2.0; });
  with_spec([](SyntheticSpec& s) { s.noise_std = 0.2; });
  with_spec([](SyntheticSpec& s) { s.subspace_seed = 8; });
  with_spec([](SyntheticSpec& s) { s.context_cov_seed = 12; });

  const std::string label = "movielens:all";
  variants.push_back(config_hash(snapshot_config(base_cfg, nullptr, &label)));

  for (const std::string& h : variants) CHECK(h != base);
  // The variants should also be pairwise distinct here.
  const std::set<std::string> unique(variants.begin(), variants.end());
  CHECK(unique.size() == variants.size());
}

TEST_CASE("manifest JSON is complete and parseable") {
  RunManifest m;
  m.config = {{"policy", "p-linucb"}, {"num_tasks", "4"}};
  m.hash = config_hash(m.config);
  m.command = "artifact synth --tasks 4";
  m.policy = "p-linucb";
  m.outputs = {"raw.csv", "summary.csv"};
  m.seeds_completed = {1, 2};
  m.seeds_failed = {{3, "boom"}};
  m.wall_seconds = 1.5;
  m.timestamp_utc = "2024-05-01T12:00:00Z";

  const std::string path = path_in_dir("manifest.json");
  write_manifest(m, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("hash") == m.hash);
  CHECK(j.at("command") == m.command);
  CHECK(j.at("policy") == "p-linucb");
  CHECK(j.at("timestamp_utc") == m.timestamp_utc);
  CHECK(j.at("wall_seconds") == doctest::Approx(1.5));
  CHECK(j.at("config").at("policy") == "p-linucb");
  CHECK(j.at("config").at("num_tasks") == "4");
  CHECK(j.at("outputs") == nlohmann::json({"raw.csv", "summary.csv"}));
  CHECK(j.at("seeds_completed") == nlohmann::json({1, 2}));
  REQUIRE(j.at("seeds_failed").size() == 1);
  CHECK(j.at("seeds_failed")[0].at("seed") == 3);
  CHECK(j.at("seeds_failed")[0].at("error") == "boom");
}
