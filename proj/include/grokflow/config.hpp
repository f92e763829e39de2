#pragma once

#include "grokflow/flows.hpp"
#include "grokflow/problems.hpp"
#include "grokflow/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace grokflow {

/// Declarative description of one run. Parsed strictly: unknown fields are
/// rejected, and the accepted shape is published as
/// schema/experiment_config.schema.json.
struct ExperimentConfig {
  int version = 1;

  // problem
  std::string problem_kind;
  std::uint64_t seed = 0;
  nlohmann::json problem_params;  // validated per kind at build time

  // regularisation: single lambda for run, grid for sweep configs
  std::optional<Scalar> lambda;
  std::vector<Scalar> lambda_grid;

  // integrator
  std::string method = "rk45_adaptive";  // gd | rk45_adaptive | rk4_fixed | euler
  Scalar gamma = 1e-2;                   // gd stepsize
  long iterations = 0;                   // gd
  Scalar horizon = 0;                    // flow methods
  Scalar step = 1e-3;                    // fixed-step flow methods
  Scalar rel_tol = 1e-8, abs_tol = 1e-10;
  int record_points = 400;

  std::vector<Scalar> snapshot_times;  // 1-D prediction snapshots
  bool dump_states = false;
  std::string output;  // default output directory
  std::vector<std::string> tags;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// A problem built from a config, together with the generated initial state.
struct BuiltProblem {
  std::unique_ptr<Problem> problem;
  VecX w0;
  std::optional<DataSet> dataset;  // raw 1-D training data where applicable
};

/// Instantiates the configured problem and seeds the initial parameters.
/// All randomness derives from the config seed via the counter generator.
BuiltProblem build_problem(const ExperimentConfig& cfg);

IntegratorSpec integrator_spec(const ExperimentConfig& cfg);

}  // namespace grokflow
