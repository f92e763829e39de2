#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace grokflow {

using Scalar = double;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// Thrown when an operation receives input violating its preconditions
/// (dimension mismatch, non-finite entries, out-of-range indices).
class RejectedInputError : public std::invalid_argument {
public:
  explicit RejectedInputError(const std::string& msg)
      : std::invalid_argument(msg) {}
};

/// Thrown when an integration blows up (non-finite state or norm guard hit).
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& msg, Scalar time, long step)
      : std::runtime_error(msg), time(time), step(step) {}
  Scalar time;
  long step;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw RejectedInputError(msg);
}

inline bool all_finite(const MatX& m) { return m.allFinite(); }

}  // namespace grokflow
