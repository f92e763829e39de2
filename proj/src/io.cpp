#include "grokflow/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace grokflow::io {

namespace {

std::string fmt(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> csv_columns(const Trajectory& traj) {
  std::vector<std::string> cols = {"time", "loss", "reg_loss", "grad_norm",
                                   "weight_norm_sq"};
  std::vector<std::string> extras;
  for (const auto& [name, _] : traj.observables)
    if (std::find(cols.begin(), cols.end(), name) == cols.end())
      extras.push_back(name);
  std::sort(extras.begin(), extras.end());
  cols.insert(cols.end(), extras.begin(), extras.end());
  return cols;
}

std::string trajectory_csv(const Trajectory& traj) {
  const auto cols = csv_columns(traj);
  std::ostringstream os;
  for (std::size_t c = 0; c < cols.size(); ++c)
    os << (c ? "," : "") << cols[c];
  os << "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ",";
      if (cols[c] == "time") {
        os << fmt(traj.times[i]);
      } else {
        auto it = traj.observables.find(cols[c]);
        os << (it != traj.observables.end() && i < it->second.size()
                   ? fmt(it->second[i])
                   : "nan");
      }
    }
    os << "\n";
  }
  return os.str();
}

void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << trajectory_csv(traj);
}

void write_states_binary(const Trajectory& traj,
                         const std::filesystem::path& path,
                         const std::string& layout) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  for (const auto& w : traj.states) {
    for (Index i = 0; i < w.size(); ++i) {
      // Assumes a little-endian host; asserted in the header file.
      double v = w[i];
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>(bits >> (8 * b));
      f.write(buf, 8);
    }
  }
  nlohmann::json header;
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["order"] = "row-major";
  header["rows"] = traj.states.size();
  header["cols"] = traj.states.empty() ? 0 : traj.states[0].size();
  header["layout"] = layout;
  std::ofstream h(path.string() + ".json");
  h << header.dump(2) << "\n";
}

void write_dataset_csv(const VecX& inputs, const VecX& targets,
                       const std::filesystem::path& path) {
  require(inputs.size() == targets.size(), "write_dataset_csv: size mismatch");
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "input,target\n";
  for (Index i = 0; i < inputs.size(); ++i)
    f << fmt(inputs[i]) << "," << fmt(targets[i]) << "\n";
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("empty trajectory file " + path.string());
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
  }
  Trajectory traj;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::size_t c = 0;
    while (std::getline(ss, tok, ',') && c < cols.size()) {
      const Scalar v = std::stod(tok);
      if (cols[c] == "time")
        traj.times.push_back(v);
      else
        traj.observables[cols[c]].push_back(v);
      ++c;
    }
  }
  return traj;
}

}  // namespace grokflow::io
