#pragma once

#include "grokflow/flows.hpp"
#include "grokflow/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace grokflow::io {

/// Column order for trajectory CSV: time,loss,reg_loss,grad_norm,
/// weight_norm_sq, then remaining observables alphabetically.
std::vector<std::string> csv_columns(const Trajectory& traj);

std::string trajectory_csv(const Trajectory& traj);

void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path);

/// Dumps all recorded states as little-endian 64-bit floats, row-major (one
/// row per sample), with a JSON header file <path>.json describing layout.
void write_states_binary(const Trajectory& traj,
                         const std::filesystem::path& path,
                         const std::string& layout);

/// One row per sample: "input,target".
void write_dataset_csv(const VecX& inputs, const VecX& targets,
                       const std::filesystem::path& path);

Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace grokflow::io
