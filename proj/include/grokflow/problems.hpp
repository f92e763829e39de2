#pragma once

#include "grokflow/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace grokflow {

/// Plain (inputs, targets) container for 1-D regression problems.
struct DataSet {
  VecX inputs;
  VecX targets;

  DataSet() = default;
  DataSet(VecX x, VecX y) : inputs(std::move(x)), targets(std::move(y)) {
    require(inputs.size() == targets.size(),
            "DataSet: inputs and targets must have equal count");
  }
  Index size() const { return inputs.size(); }
};

/// A nonnegative C^1 (usually C^inf) training objective F: R^d -> R with
/// analytic derivatives. Instances are immutable after construction and all
/// evaluations are pure.
class Problem {
public:
  virtual ~Problem() = default;

  virtual Index dim() const = 0;
  virtual std::string kind() const = 0;

  virtual Scalar value(const VecX& w) const = 0;
  virtual VecX gradient(const VecX& w) const = 0;
  virtual MatX hessian(const VecX& w) const = 0;
  virtual VecX hessian_vec(const VecX& w, const VecX& v) const = 0;

  /// Generalisation metric where one exists (unmasked Frobenius error, test
  /// grid MSE). Problems without a test set return nullopt.
  virtual std::optional<Scalar> test_loss(const VecX&) const {
    return std::nullopt;
  }

  /// Problem-specific observables recorded along trajectories.
  virtual std::map<std::string, Scalar> extras(const VecX&) const {
    return {};
  }

  /// True when the objective is not C^3 (relu networks); verification suites
  /// should prefer smooth instances.
  virtual bool smooth() const { return true; }

  /// How w packs structured parameters, e.g. "[U(n*r), V(m*r)] column-major".
  virtual std::string layout() const { return "flat"; }

protected:
  void check_dim(const VecX& w) const {
    require(w.size() == dim(), kind() + ": parameter dimension mismatch");
    require(w.allFinite(), kind() + ": non-finite parameters");
  }
};

/// F(w) = 1/2 ||Xw - y||^2. Critical set is the affine space {Xw = y} when
/// the system is interpolating (n <= d, X full rank).
class LinearRegressionProblem final : public Problem {
public:
  LinearRegressionProblem(MatX X, VecX y);

  Index dim() const override { return X_.cols(); }
  std::string kind() const override { return "linear_regression"; }
  Scalar value(const VecX& w) const override;
  VecX gradient(const VecX& w) const override;
  MatX hessian(const VecX& w) const override;
  VecX hessian_vec(const VecX& w, const VecX& v) const override;

  const MatX& X() const { return X_; }
  const VecX& y() const { return y_; }
  Scalar sigma_min() const { return sigma_min_; }
  Scalar sigma_max() const { return sigma_max_; }
  bool rank_deficient_warning() const { return rank_warning_; }

private:
  MatX X_;
  VecX y_;
  MatX XtX_;
  VecX Xty_;
  Scalar sigma_min_ = 0, sigma_max_ = 0;
  bool rank_warning_ = false;
};

/// F(U, V) = sum_{(i,j) in Omega} ((UV^T)_{ij} - M*_{ij})^2 with
/// w = [vec(U); vec(V)], both column-major.
class MatrixCompletionProblem final : public Problem {
public:
  MatrixCompletionProblem(MatX M_star,
                          std::vector<std::pair<Index, Index>> mask,
                          Index r);

  Index dim() const override { return (M_star_.rows() + M_star_.cols()) * r_; }
  std::string kind() const override { return "matrix_completion"; }
  Scalar value(const VecX& w) const override;
  VecX gradient(const VecX& w) const override;
  MatX hessian(const VecX& w) const override;
  VecX hessian_vec(const VecX& w, const VecX& v) const override;
  std::optional<Scalar> test_loss(const VecX& w) const override;
  std::map<std::string, Scalar> extras(const VecX& w) const override;
  std::string layout() const override;

  Index rows() const { return M_star_.rows(); }
  Index cols() const { return M_star_.cols(); }
  Index factor_rank() const { return r_; }
  const MatX& target() const { return M_star_; }
  const std::vector<std::pair<Index, Index>>& mask() const { return mask_; }

  VecX pack(const MatX& U, const MatX& V) const;
  std::pair<MatX, MatX> unpack(const VecX& w) const;

private:
  MatX masked_residual(const MatX& U, const MatX& V) const;

  MatX M_star_;
  std::vector<std::pair<Index, Index>> mask_;
  MatX mask_indicator_;  // 1 on observed entries
  Index r_;
};

/// F(u, v) = 1/2 ||X(u*u - v*v) - y||^2 with w = [u; v]. The effective
/// linear predictor beta = u*u - v*v is exposed as an observable.
class DiagonalNetProblem final : public Problem {
public:
  DiagonalNetProblem(MatX X, VecX y);
  DiagonalNetProblem(MatX X, VecX y, DataSet test);

  Index dim() const override { return 2 * X_.cols(); }
  std::string kind() const override { return "diagonal_net"; }
  Scalar value(const VecX& w) const override;
  VecX gradient(const VecX& w) const override;
  MatX hessian(const VecX& w) const override;
  VecX hessian_vec(const VecX& w, const VecX& v) const override;
  std::optional<Scalar> test_loss(const VecX& w) const override;
  std::map<std::string, Scalar> extras(const VecX& w) const override;
  std::string layout() const override { return "[u(d), v(d)]"; }

  const MatX& X() const { return X_; }
  const VecX& y() const { return y_; }
  VecX beta(const VecX& w) const;

  /// Test predictions require the feature map; set by the Fourier builder.
  void set_test_features(MatX Xt, VecX yt);

private:
  MatX X_;
  VecX y_;
  MatX test_X_;
  VecX test_y_;
};

enum class Activation { relu, softplus };

/// Width-m two-layer scalar-input network
/// f_w(x) = sum_j u_j sigma(v_j x + b_j), F(w) = 1/(2n) sum (f(x_i)-y_i)^2,
/// with w = [u(m); v(m); b(m)]. softplus(beta) is the smooth mode; relu uses
/// the subgradient convention relu'(0) = 0 and drops the distributional
/// second-derivative term.
class TwoLayerNetProblem final : public Problem {
public:
  TwoLayerNetProblem(DataSet train, Index width, Activation act,
                     Scalar softplus_beta = 20.0);
  TwoLayerNetProblem(DataSet train, DataSet test, Index width, Activation act,
                     Scalar softplus_beta = 20.0);

  Index dim() const override { return 3 * m_; }
  std::string kind() const override { return "two_layer_net"; }
  Scalar value(const VecX& w) const override;
  VecX gradient(const VecX& w) const override;
  MatX hessian(const VecX& w) const override;
  VecX hessian_vec(const VecX& w, const VecX& v) const override;
  std::optional<Scalar> test_loss(const VecX& w) const override;
  bool smooth() const override { return act_ == Activation::softplus; }
  std::string layout() const override { return "[u(m), v(m), b(m)]"; }

  Index width() const { return m_; }
  Scalar predict(const VecX& w, Scalar x) const;

private:
  Scalar act(Scalar z) const;
  Scalar act_d(Scalar z) const;
  Scalar act_dd(Scalar z) const;

  DataSet train_, test_;
  Index m_;
  Activation act_;
  Scalar beta_;
};

std::unique_ptr<LinearRegressionProblem> make_linear_regression(MatX X, VecX y);
std::unique_ptr<MatrixCompletionProblem> make_matrix_completion(
    MatX M_star, std::vector<std::pair<Index, Index>> mask, Index r);
std::unique_ptr<DiagonalNetProblem> make_diagonal_net(MatX X, VecX y);
std::unique_ptr<TwoLayerNetProblem> make_two_layer_net(
    DataSet train, Index width, Activation act, Scalar softplus_beta = 20.0);

/// Fourier feature map [1, cos(pi x/2) ... cos(pi d_f x/2),
/// sin(pi x/2) ... sin(pi d_f x/2)] giving d = 2 d_f + 1 features.
VecX fourier_features(Scalar x, Index d_f);
MatX fourier_feature_matrix(const VecX& xs, Index d_f);

struct FdCheckResult {
  Scalar grad_rel_error;
  Scalar hess_rel_error;
};

/// Central-difference verification of analytic derivatives; the step is
/// scaled by (1 + |w|_inf).
FdCheckResult fd_check(const Problem& p, const VecX& w, Scalar h = 1e-5);

}  // namespace grokflow
