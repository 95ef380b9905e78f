#include "metabandit/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace metabandit {

namespace {

void throw_io(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

std::string join_u64(const std::vector<std::uint64_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace

std::string format_double17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

ConfigSnapshot snapshot_config(const ExperimentConfig& cfg,
                               const SyntheticSpec* synth,
                               const std::string* source_label) {
  ConfigSnapshot snap;
  snap["policy"] = policy_name(cfg.policy);
  snap["num_tasks"] = std::to_string(cfg.num_tasks);
  snap["rounds_per_task"] = std::to_string(cfg.rounds_per_task);
  snap["rank_mode"] =
      cfg.rank_mode == RankMode::EigengapAuto ? "auto" : "fixed";
  snap["fixed_rank_p"] = std::to_string(cfg.fixed_rank_p);
  snap["init_tasks"] = std::to_string(cfg.init_tasks);
  snap["heldout_draws"] = std::to_string(cfg.heldout_draws);
  snap["seeds"] = join_u64(cfg.seeds);

  const PolicyConfig& pc = cfg.policy_cfg;
  snap["lambda1"] = format_double17(pc.lambda1);
  snap["lambda2"] = format_double17(pc.lambda2);
  snap["lambda_ridge"] = format_double17(pc.lambda_ridge);
  snap["delta"] = format_double17(pc.delta);
  snap["v_bound"] = format_double17(pc.v_bound);
  snap["w_bound"] = format_double17(pc.w_bound);
  snap["alpha"] = format_double17(pc.alpha);
  snap["ucb_scale"] = format_double17(pc.ucb_scale);
  snap["ts_scale"] = format_double17(pc.ts_scale);
  snap["horizon"] = std::to_string(pc.horizon);

  if (synth != nullptr) {
    snap["source"] = "synthetic";
    snap["env.dim"] = std::to_string(synth->dim);
    snap["env.true_rank"] = std::to_string(synth->true_rank);
    snap["env.arms_per_round"] = std::to_string(synth->arms_per_round);
    snap["env.task_variance"] = format_double17(synth->task_variance);
    snap["env.param_scale"] = format_double17(synth->param_scale);
    snap["env.noise_std"] = format_double17(synth->noise_std);
    snap["env.subspace_seed"] = std::to_string(synth->subspace_seed);
    snap["env.context_cov_seed"] = std::to_string(synth->context_cov_seed);
  } else if (source_label != nullptr) {
    snap["source"] = *source_label;
  }
  return snap;
}

std::string config_hash(const ConfigSnapshot& snapshot) {
  // FNV-1a, 64-bit. std::map iteration gives a canonical key order.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [key, value] : snapshot) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_regret_csv(const RegretLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << "policy,seed,task,round,inst_regret,cum_regret\n";
  for (const RegretRow& row : log.rows) {
    out << log.policy << ',' << row.seed << ',' << row.task << ','
        << row.round << ',' << format_double17(row.inst_regret) << ','
        << format_double17(row.cum_regret) << '\n';
  }
  if (!out.flush()) throw_io("write failed", path);
}

RegretLog read_regret_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open for reading", path);
  std::string line;
  if (!std::getline(in, line)) throw_io("empty file", path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "policy,seed,task,round,inst_regret,cum_regret")
    throw_io("unexpected header", path);

  RegretLog log;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw_io("malformed row", path);
    if (log.policy.empty()) {
      log.policy = fields[0];
    } else if (log.policy != fields[0]) {
      throw_io("mixed policies in one file", path);
    }
    RegretRow row;
    row.seed = std::stoull(fields[1]);
    row.task = std::stoi(fields[2]);
    row.round = std::stoi(fields[3]);
    row.inst_regret = std::strtod(fields[4].c_str(), nullptr);
    row.cum_regret = std::strtod(fields[5].c_str(), nullptr);
    if (row.round + 1 > log.rounds_per_task)
      log.rounds_per_task = row.round + 1;
    if (log.seeds_completed.empty() || log.seeds_completed.back() != row.seed)
      if (std::find(log.seeds_completed.begin(), log.seeds_completed.end(),
                    row.seed) == log.seeds_completed.end())
        log.seeds_completed.push_back(row.seed);
    log.rows.push_back(row);
  }
  return log;
}

void write_regret_summary_csv(const RegretLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << "policy,round,mean_cum_regret,stderr\n";
  const std::vector<CurvePoint> curve = expected_transfer_regret(log);
  for (const CurvePoint& pt : curve) {
    out << log.policy << ',' << pt.index << ','
        << format_double17(pt.mean) << ','
        << format_double17(pt.stderr_value) << '\n';
  }
  if (!out.flush()) throw_io("write failed", path);
}

void write_sweep_csv(const std::vector<SweepPoint>& points, int dim,
                     const std::string& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << "policy,q,p,mean_total_regret,stderr\n";
  for (const SweepPoint& pt : points) {
    out << policy << ',' << pt.complement_rank << ','
        << (dim - pt.complement_rank) << ','
        << format_double17(pt.mean_total) << ','
        << format_double17(pt.stderr_value) << '\n';
  }
  if (!out.flush()) throw_io("write failed", path);
}

void write_werror_csv(const WErrorLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << "policy,seed,task,rel_error,in_init\n";
  for (const WErrorRow& row : log.rows) {
    out << log.policy << ',' << row.seed << ',' << row.task << ','
        << format_double17(row.rel_error) << ',' << (row.in_init ? 1 : 0)
        << '\n';
  }
  if (!out.flush()) throw_io("write failed", path);
}

void write_werror_summary_csv(const WErrorLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << "policy,task,mean_rel_error,stderr\n";
  for (const CurvePoint& pt : w_error_summary(log)) {
    out << log.policy << ',' << pt.index << ',' << format_double17(pt.mean)
        << ',' << format_double17(pt.stderr_value) << '\n';
  }
  if (!out.flush()) throw_io("write failed", path);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::ordered_json j;
  j["hash"] = manifest.hash;
  j["command"] = manifest.command;
  j["policy"] = manifest.policy;
  j["timestamp_utc"] = manifest.timestamp_utc;
  j["wall_seconds"] = manifest.wall_seconds;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [key, value] : manifest.config) cfg[key] = value;
  j["config"] = cfg;
  j["outputs"] = manifest.outputs;
  j["seeds_completed"] = manifest.seeds_completed;
  nlohmann::ordered_json failed = nlohmann::ordered_json::array();
  for (const auto& [seed, why] : manifest.seeds_failed) {
    failed.push_back({{"seed", seed}, {"error", why}});
  }
  j["seeds_failed"] = failed;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open for writing", path);
  out << j.dump(2) << '\n';
  if (!out.flush()) throw_io("write failed", path);
}

}  // namespace metabandit
