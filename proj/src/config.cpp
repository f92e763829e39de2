#include "grokflow/config.hpp"

#include "grokflow/rng.hpp"
#include "grokflow/spectral.hpp"

#include <fstream>
#include <set>

namespace grokflow {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw RejectedInputError("config: unknown field \"" + it.key() +
                               "\" in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"version", "problem", "lambda", "lambdas", "integrator",
                  "snapshot_times", "dump_states", "output", "tags"},
                 "top level");
  ExperimentConfig cfg;
  cfg.version = get_or(j, "version", 1);
  require(cfg.version == 1, "config: unsupported version");

  require(j.contains("problem"), "config: missing \"problem\"");
  const json& pj = j.at("problem");
  require(pj.contains("kind"), "config: problem.kind required");
  cfg.problem_kind = pj.at("kind").get<std::string>();
  cfg.seed = get_or<std::uint64_t>(pj, "seed", 0);
  cfg.problem_params = pj;
  cfg.problem_params.erase("kind");
  cfg.problem_params.erase("seed");

  if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<Scalar>();
  if (j.contains("lambdas"))
    cfg.lambda_grid = j.at("lambdas").get<std::vector<Scalar>>();
  require(cfg.lambda.has_value() || !cfg.lambda_grid.empty(),
          "config: need \"lambda\" or \"lambdas\"");

  require(j.contains("integrator"), "config: missing \"integrator\"");
  const json& ij = j.at("integrator");
  reject_unknown(ij,
                 {"method", "gamma", "iterations", "horizon", "step",
                  "rel_tol", "abs_tol", "record_points"},
                 "integrator");
  cfg.method = get_or<std::string>(ij, "method", "rk45_adaptive");
  cfg.gamma = get_or<Scalar>(ij, "gamma", 1e-2);
  cfg.iterations = get_or<long>(ij, "iterations", 0);
  cfg.horizon = get_or<Scalar>(ij, "horizon", 0);
  cfg.step = get_or<Scalar>(ij, "step", 1e-3);
  cfg.rel_tol = get_or<Scalar>(ij, "rel_tol", 1e-8);
  cfg.abs_tol = get_or<Scalar>(ij, "abs_tol", 1e-10);
  cfg.record_points = get_or<int>(ij, "record_points", 400);
  if (cfg.method == "gd")
    require(cfg.iterations >= 0, "config: gd needs iterations >= 0");
  else
    require(cfg.horizon >= 0, "config: flow methods need horizon >= 0");

  cfg.snapshot_times =
      get_or<std::vector<Scalar>>(j, "snapshot_times", {});
  cfg.dump_states = get_or(j, "dump_states", false);
  cfg.output = get_or<std::string>(j, "output", "");
  cfg.tags = get_or<std::vector<std::string>>(j, "tags", {});
  return cfg;
}

json ExperimentConfig::to_json() const {
  json j;
  j["version"] = version;
  json pj = problem_params;
  pj["kind"] = problem_kind;
  pj["seed"] = seed;
  j["problem"] = pj;
  if (lambda) j["lambda"] = *lambda;
  if (!lambda_grid.empty()) j["lambdas"] = lambda_grid;
  json ij;
  ij["method"] = method;
  if (method == "gd") {
    ij["gamma"] = gamma;
    ij["iterations"] = iterations;
  } else {
    ij["horizon"] = horizon;
    if (method == "rk45_adaptive") {
      ij["rel_tol"] = rel_tol;
      ij["abs_tol"] = abs_tol;
    } else {
      ij["step"] = step;
    }
  }
  ij["record_points"] = record_points;
  j["integrator"] = ij;
  if (!snapshot_times.empty()) j["snapshot_times"] = snapshot_times;
  if (dump_states) j["dump_states"] = true;
  if (!output.empty()) j["output"] = output;
  if (!tags.empty()) j["tags"] = tags;
  return j;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw RejectedInputError("config: cannot open " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw RejectedInputError("config: JSON parse error in " + path.string() +
                             ": " + e.what());
  }
  return from_json(j);
}

IntegratorSpec integrator_spec(const ExperimentConfig& cfg) {
  IntegratorSpec spec;
  if (cfg.method == "rk45_adaptive")
    spec.method = Method::rk45_adaptive;
  else if (cfg.method == "rk4_fixed")
    spec.method = Method::rk4_fixed;
  else if (cfg.method == "euler")
    spec.method = Method::euler;
  else if (cfg.method == "gd")
    spec.method = Method::rk45_adaptive;  // unused for gd runs
  else
    throw RejectedInputError("config: unknown integrator method " +
                             cfg.method);
  spec.step = cfg.step;
  spec.rel_tol = cfg.rel_tol;
  spec.abs_tol = cfg.abs_tol;
  spec.record_points = cfg.record_points;
  return spec;
}

namespace {

BuiltProblem build_linear_regression(const nlohmann::json& pj,
                                     std::uint64_t seed) {
  reject_unknown(pj, {"n", "d", "init_std"}, "linear_regression");
  const Index n = pj.at("n").get<Index>();
  const Index d = pj.at("d").get<Index>();
  const Scalar init_std = get_or<Scalar>(pj, "init_std", 1.0);
  CounterRng rng(seed);
  MatX X = rng.gaussian_matrix(n, d);
  VecX y = rng.gaussian_vector(n);
  BuiltProblem bp;
  bp.problem = make_linear_regression(std::move(X), std::move(y));
  bp.w0 = rng.gaussian_vector(d, init_std);
  return bp;
}

// Minimum-nuclear-norm completion of the observed entries via
// Douglas-Rachford splitting (entry projection + singular-value
// thresholding).
MatX nuclear_min_completion(const MatX& M,
                            const std::vector<std::pair<Index, Index>>& mask,
                            int iters) {
  const Scalar thresh = 0.05 * spectral::svd(M).sigma[0];
  auto project = [&](MatX X) {
    for (const auto& [i, j] : mask) X(i, j) = M(i, j);
    return X;
  };
  MatX Z = MatX::Zero(M.rows(), M.cols());
  MatX X = project(Z);
  for (int k = 0; k < iters; ++k) {
    X = project(Z);
    auto s = spectral::svd(2 * X - Z);
    VecX sig = (s.sigma.array() - thresh).max(0.0);
    MatX Y = s.U * sig.asDiagonal() * s.V.transpose();
    Z += Y - X;
  }
  return X;
}

// Refine a random low-rank target until it is the minimum-nuclear-norm
// completion of its own observed entries, so the norm-minimising drift can
// reconstruct it exactly from the mask. Alternates the convex completion
// with a hard rank truncation until the two agree.
MatX plant_recoverable_target(MatX M,
                              const std::vector<std::pair<Index, Index>>& mask,
                              Index rank) {
  for (int round = 0; round < 40; ++round) {
    MatX X = nuclear_min_completion(M, mask, 3000);
    auto s = spectral::svd(X);
    VecX sig = s.sigma;
    for (Index i = rank; i < sig.size(); ++i) sig[i] = 0;
    MatX M_next = s.U * sig.asDiagonal() * s.V.transpose();
    const Scalar gap = (X - M_next).norm() / M_next.norm();
    M = M_next;
    if (gap < 1e-7) break;
  }
  return M;
}

BuiltProblem build_matrix_completion(const nlohmann::json& pj,
                                     std::uint64_t seed) {
  reject_unknown(pj,
                 {"n", "m", "rank", "r", "mask_fraction", "full_mask",
                  "init_std", "target_scale", "planted"},
                 "matrix_completion");
  const Index n = pj.at("n").get<Index>();
  const Index m = pj.at("m").get<Index>();
  const Index rank = pj.at("rank").get<Index>();
  const Index r = pj.at("r").get<Index>();
  const bool full_mask = get_or(pj, "full_mask", false);
  const Scalar frac = get_or<Scalar>(pj, "mask_fraction", 0.5);
  const Scalar init_std = get_or<Scalar>(pj, "init_std", 1.0);
  const Scalar target_scale = get_or<Scalar>(pj, "target_scale", 1.0);
  require(rank >= 1 && rank <= std::min(n, m), "matrix_completion: bad rank");

  CounterRng rng(seed);
  MatX A = rng.gaussian_matrix(n, rank);
  MatX B = rng.gaussian_matrix(m, rank);
  MatX M_star = target_scale * A * B.transpose();

  std::vector<std::pair<Index, Index>> mask;
  if (full_mask) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) mask.emplace_back(i, j);
  } else {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        if (rng.uniform() < frac) mask.emplace_back(i, j);
    if (mask.empty()) mask.emplace_back(0, 0);
  }

  if (get_or(pj, "planted", false) && !full_mask)
    M_star = plant_recoverable_target(std::move(M_star), mask, rank);

  auto prob = make_matrix_completion(std::move(M_star), std::move(mask), r);
  MatX U0 = rng.gaussian_matrix(n, r, init_std);
  MatX V0 = rng.gaussian_matrix(m, r, init_std);
  BuiltProblem bp;
  bp.w0 = prob->pack(U0, V0);
  bp.problem = std::move(prob);
  return bp;
}

BuiltProblem build_diagonal_net(const nlohmann::json& pj, std::uint64_t seed) {
  reject_unknown(pj,
                 {"fourier_features", "n", "init_std", "normalize",
                  "test_points"},
                 "diagonal_net");
  const Index d_f = get_or<Index>(pj, "fourier_features", 30);
  const Index n = get_or<Index>(pj, "n", 12);
  const Scalar init_std = get_or<Scalar>(pj, "init_std", std::sqrt(0.1));
  const bool normalize = get_or(pj, "normalize", true);
  const Index test_points = get_or<Index>(pj, "test_points", 256);

  // Teacher: sparse Fourier series 1 + cos(6 pi x / 2) + sin(21 pi x / 2),
  // i.e. coefficients 1 on features {0, cos_6, sin_21}.
  auto teacher = [](Scalar x) {
    constexpr Scalar half_pi = 3.14159265358979323846 / 2.0;
    return 1.0 + std::cos(6 * half_pi * x) + std::sin(21 * half_pi * x);
  };

  CounterRng rng(seed);
  VecX xs(n), ys(n);
  for (Index i = 0; i < n; ++i) {
    xs[i] = rng.uniform(-1.0, 1.0);
    ys[i] = teacher(xs[i]);
  }
  MatX X = fourier_feature_matrix(xs, d_f);
  VecX y = ys;
  if (normalize) {
    const Scalar s = 1.0 / std::sqrt(static_cast<Scalar>(n));
    X *= s;
    y *= s;
  }
  auto prob = make_diagonal_net(std::move(X), std::move(y));

  // Equispaced test grid on the training interval, raw (unnormalised)
  // features so test MSE is a plain prediction error.
  VecX xt(test_points), yt(test_points);
  for (Index i = 0; i < test_points; ++i) {
    xt[i] = -1.0 + 2.0 * i / (test_points - 1);
    yt[i] = teacher(xt[i]);
  }
  prob->set_test_features(fourier_feature_matrix(xt, d_f), yt);

  BuiltProblem bp;
  bp.w0 = rng.gaussian_vector(prob->dim(), init_std);
  bp.problem = std::move(prob);
  bp.dataset = DataSet(xs, ys);
  return bp;
}

BuiltProblem build_two_layer_net(const nlohmann::json& pj,
                                 std::uint64_t seed) {
  reject_unknown(pj,
                 {"m", "n", "activation", "softplus_beta", "init_std",
                  "teacher", "x_range", "test_points"},
                 "two_layer_net");
  const Index m = get_or<Index>(pj, "m", 100);
  const Index n = get_or<Index>(pj, "n", 10);
  const std::string act_name = get_or<std::string>(pj, "activation", "relu");
  const Scalar sp_beta = get_or<Scalar>(pj, "softplus_beta", 20.0);
  const Scalar init_std = get_or<Scalar>(pj, "init_std", 2.0);
  const Index test_points = get_or<Index>(pj, "test_points", 256);
  std::vector<Scalar> x_range =
      get_or<std::vector<Scalar>>(pj, "x_range", {-2.0, 2.0});
  require(x_range.size() == 2 && x_range[0] < x_range[1],
          "two_layer_net: bad x_range");

  Activation act;
  if (act_name == "relu")
    act = Activation::relu;
  else if (act_name == "softplus")
    act = Activation::softplus;
  else
    throw RejectedInputError("two_layer_net: unknown activation " + act_name);

  // Default 3-kink teacher; rows are (coefficient, kink position).
  std::vector<std::vector<Scalar>> teacher_spec = get_or(
      pj, "teacher",
      std::vector<std::vector<Scalar>>{{1.0, -1.0}, {-2.0, 0.0}, {1.5, 1.0}});
  auto teacher = [&teacher_spec](Scalar x) {
    Scalar f = 0;
    for (const auto& ck : teacher_spec)
      f += ck.at(0) * std::max<Scalar>(0, x - ck.at(1));
    return f;
  };

  CounterRng rng(seed);
  VecX xs(n), ys(n);
  for (Index i = 0; i < n; ++i) {
    xs[i] = rng.uniform(x_range[0], x_range[1]);
    ys[i] = teacher(xs[i]);
  }
  VecX xt(test_points), yt(test_points);
  for (Index i = 0; i < test_points; ++i) {
    xt[i] = x_range[0] + (x_range[1] - x_range[0]) * i / (test_points - 1);
    yt[i] = teacher(xt[i]);
  }

  BuiltProblem bp;
  bp.problem = std::make_unique<TwoLayerNetProblem>(
      DataSet(xs, ys), DataSet(xt, yt), m, act, sp_beta);
  bp.w0 = rng.gaussian_vector(3 * m, init_std);
  bp.dataset = DataSet(xs, ys);
  return bp;
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  if (cfg.problem_kind == "linear_regression")
    return build_linear_regression(cfg.problem_params, cfg.seed);
  if (cfg.problem_kind == "matrix_completion")
    return build_matrix_completion(cfg.problem_params, cfg.seed);
  if (cfg.problem_kind == "diagonal_net")
    return build_diagonal_net(cfg.problem_params, cfg.seed);
  if (cfg.problem_kind == "two_layer_net")
    return build_two_layer_net(cfg.problem_params, cfg.seed);
  throw RejectedInputError("config: unknown problem kind " + cfg.problem_kind);
}

}  // namespace grokflow
