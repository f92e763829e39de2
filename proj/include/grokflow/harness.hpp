#pragma once

#include "grokflow/config.hpp"
#include "grokflow/flows.hpp"
#include "grokflow/oracles.hpp"
#include "grokflow/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace grokflow::harness {

/// Serialised results of one run: config echo, artifact paths and summary
/// scalars. Written as report.json inside the run directory.
struct RunReport {
  nlohmann::json config_echo;
  std::string trajectory_csv;
  std::string states_bin;    // empty unless dump_states
  std::string dataset_csv;   // empty unless the problem carries a 1-D dataset
  std::string snapshots_csv; // empty unless snapshot_times configured

  Scalar final_train_loss = 0;
  Scalar final_test_loss = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar final_weight_norm_sq = 0;
  Scalar final_kkt_residual = 0;
  int detected_rank = -1;  // matrix completion only
  Scalar initial_grad_norm = 0;
  Scalar wall_clock_s = 0;
  bool integration_failed = false;
  std::string failure;

  nlohmann::json timescale;  // oracles::TimescaleReport JSON, when computed

  nlohmann::json to_json() const;
};

/// Runs one experiment and writes all artifacts into out_dir.
RunReport cmd_run(const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir);

/// In-memory variant used by sweeps and verification: returns the trajectory
/// alongside the report, writes nothing.
struct RunResult {
  Trajectory trajectory;
  RunReport report;
};
RunResult run_experiment(const ExperimentConfig& cfg, Scalar lambda);

struct SweepSummary {
  std::vector<Scalar> lambdas;
  std::vector<Scalar> sup_distance_to_baseline;  // over shared record times
  std::vector<Scalar> endpoint_kkt_residual;
  std::vector<Scalar> junction_gap;  // |w~^l(t(l)) - Phi(w0)|
  Scalar phi_norm = 0;
  nlohmann::json to_json() const;
};

/// Runs each lambda plus a lambda = 0 baseline; per-run artifacts land in
/// out_dir/lambda_<value>/ and the summary in out_dir/sweep_summary.json.
/// GROKFLOW_THREADS caps concurrency.
SweepSummary cmd_sweep(const ExperimentConfig& cfg,
                       const std::vector<Scalar>& lambdas,
                       const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

/// Suites: fast_phase, junction, slow_phase, kkt, end_to_end.
std::vector<CheckResult> cmd_verify(const std::string& suite,
                                    const std::string& scale = "ci");

/// Reads a completed run directory, computes the timescale report and the
/// measured grokking threshold, and writes analysis.json.
nlohmann::json cmd_analyze(const std::filesystem::path& run_dir);

/// Detected rank of UV^T: singular values above 1e-3 sigma_1(M_star).
int detected_rank(const MatX& product, Scalar sigma1_target);

}  // namespace grokflow::harness
