#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "otfpf/experiments.hpp"

namespace otfpf {

inline constexpr const char* kToolVersion = "0.1.0";

// JSON configuration surface.  Missing optional keys get documented
// defaults; structural problems raise ConfigError naming the key path.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Canonical re-emission (defaults materialized, keys sorted); parsing the
// result yields an equal configuration.
std::string emit_config(const ExperimentConfig& cfg);

// FNV-1a digest of the canonicalized config text.
std::string config_hash(const ExperimentConfig& cfg);

// Written alongside every output directory.
struct RunManifest {
  std::string config_hash;
  uint64_t master_seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<std::string> outputs;
  double runtime_seconds = 0.0;
};
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

// Full round-trip decimal formatting (17 significant digits) so downstream
// tools reproduce every value exactly.
std::string fmt17(double v);

// CSV schemas (header rows are part of the interface):
//   trajectory.csv: t,kind,component,value
//     kind in {truth, kalman_mean, emp_mean, err_mean, err_cov_fro}
//   path.csv:       t,x_1..x_d,dz_1..dz_m
//   mse.csv:        n,d,estimator,mse,std_err,trials,flag
//   chaos.csv:      n,trials,err2_mean,err2_stderr,cor1_stat
//   levels.csv:     estimator,level,d,n_star
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_path_csv(std::ostream& os, const PathRecord& path, double dt);
void write_mse_csv(std::ostream& os, const std::vector<MseRecord>& records);
void write_chaos_csv(std::ostream& os, const ChaosResult& result);
void write_levels_csv(std::ostream& os, const std::vector<LevelPoint>& levels);

// Matrix-equation self-checks behind the `validate` subcommand: residual
// table over random models, returns false if any check fails.
bool run_self_checks(std::ostream& os);

}  // namespace otfpf
