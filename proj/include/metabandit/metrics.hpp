#pragma once

#include <map>
#include <string>
#include <vector>

#include "metabandit/runner.hpp"

namespace metabandit {

/// 17 significant digits; enough for an exact double round-trip.
std::string format_double17(double value);

/// Canonical flat key=value view of a run setup; the basis for hashing.
using ConfigSnapshot = std::map<std::string, std::string>;

ConfigSnapshot snapshot_config(const ExperimentConfig& cfg,
                               const SyntheticSpec* synth,
                               const std::string* source_label);

/// FNV-1a over the canonical "key=value\n" serialization, as 16 hex digits.
/// Equal snapshots hash equal; any changed field changes the hash.
std::string config_hash(const ConfigSnapshot& snapshot);

/// Raw per-round log. Columns: policy,seed,task,round,inst_regret,cum_regret.
void write_regret_csv(const RegretLog& log, const std::string& path);
RegretLog read_regret_csv(const std::string& path);

/// Per-round aggregate. Columns: policy,round,mean_cum_regret,stderr.
void write_regret_summary_csv(const RegretLog& log, const std::string& path);

/// Columns: policy,q,p,mean_total_regret,stderr.
void write_sweep_csv(const std::vector<SweepPoint>& points, int dim,
                     const std::string& policy, const std::string& path);

/// Columns: policy,seed,task,rel_error,in_init.
void write_werror_csv(const WErrorLog& log, const std::string& path);

/// Columns: policy,task,mean_rel_error,stderr.
void write_werror_summary_csv(const WErrorLog& log, const std::string& path);

struct RunManifest {
  ConfigSnapshot config;
  std::string hash;
  std::string command;
  std::string policy;
  std::vector<std::string> outputs;
  std::vector<std::uint64_t> seeds_completed;
  std::vector<std::pair<std::uint64_t, std::string>> seeds_failed;
  double wall_seconds = 0.0;
  std::string timestamp_utc;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace metabandit
