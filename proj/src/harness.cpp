#include "covgraph/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <set>
#include <thread>

#include "covgraph/csv.hpp"
#include "covgraph/normal.hpp"
#include "covgraph/npn_cov.hpp"
#include "covgraph/rng.hpp"

namespace covgraph::harness {

using nlohmann::json;

namespace {

Error bad_config(const std::string& msg) { return Error(ErrorKind::InvalidInput, "harness", msg); }
Error precondition(const std::string& msg) { return Error(ErrorKind::Precondition, "harness", msg); }

template <typename E>
E lookup(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw bad_config(std::string("unknown ") + what + " '" + s + "'");
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw bad_config(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw bad_config("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, h, 16);
  std::string out(buf, end);
  return std::string(16 - out.size(), '0') + out;
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string diag_policy_name(param::DiagPolicy p) {
  return p == param::DiagPolicy::FixedToOne ? "fixed-to-one" : "bias-corrected";
}

std::string t_max_policy_name(deconv::TMaxPolicy p) {
  return p == deconv::TMaxPolicy::AbsoluteBound ? "absolute" : "oscillatory";
}

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = sd = 0.0;
  if (xs.empty()) return;
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string to_string(Pipeline v) {
  switch (v) {
    case Pipeline::Parametric: return "parametric";
    case Pipeline::Nonparametric: return "nonparametric";
    case Pipeline::BaselineDirect: return "baseline-direct";
    case Pipeline::BaselineLsNoDeconv: return "baseline-ls";
  }
  return "?";
}

std::string to_string(LambdaPolicy v) {
  switch (v) {
    case LambdaPolicy::FixedValue: return "fixed";
    case LambdaPolicy::ParamRule: return "param-rule";
    case LambdaPolicy::NonparamRule: return "nonparam-rule";
    case LambdaPolicy::PathSweep: return "path";
  }
  return "?";
}

std::string to_string(PathCriterion v) {
  switch (v) {
    case PathCriterion::BIC: return "bic";
    case PathCriterion::ExtendedBIC: return "ebic";
    case PathCriterion::FixedTarget: return "fixed-target";
  }
  return "?";
}

std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Ok: return "ok";
    case TrialStatus::Failed: return "failed";
    case TrialStatus::Skipped: return "skipped";
  }
  return "?";
}

Pipeline pipeline_from_string(const std::string& s) {
  return lookup<Pipeline>(s,
                          {{"parametric", Pipeline::Parametric},
                           {"nonparametric", Pipeline::Nonparametric},
                           {"baseline-direct", Pipeline::BaselineDirect},
                           {"baseline-ls", Pipeline::BaselineLsNoDeconv}},
                          "pipeline");
}

LambdaPolicy lambda_policy_from_string(const std::string& s) {
  return lookup<LambdaPolicy>(s,
                              {{"fixed", LambdaPolicy::FixedValue},
                               {"param-rule", LambdaPolicy::ParamRule},
                               {"nonparam-rule", LambdaPolicy::NonparamRule},
                               {"path", LambdaPolicy::PathSweep}},
                              "lambda policy");
}

PathCriterion path_criterion_from_string(const std::string& s) {
  return lookup<PathCriterion>(s, {{"bic", PathCriterion::BIC}, {"ebic", PathCriterion::ExtendedBIC}, {"fixed-target", PathCriterion::FixedTarget}},
                               "path criterion");
}

void ExperimentConfig::validate() const {
  if (n_values.empty() || d_values.empty() || sigma2_values.empty()) throw bad_config("grid must be nonempty");
  if (trials < 1) throw bad_config("trials must be >= 1");
  if (graph.kind != "band") throw bad_config("graph kind must be 'band'");
  if (graph.p < 2) throw bad_config("graph p must be >= 2");
  for (int n : n_values)
    if (n < 2) throw bad_config("every n must be >= 2");
  for (int d : d_values)
    if (d < 1) throw bad_config("every d must be >= 1");
  for (double s : sigma2_values)
    if (!(s >= 0.0) || !std::isfinite(s)) throw bad_config("every sigma2 must be finite and >= 0");
  if (!normalize_correlation && marginal != synth::MarginalKind::GaussianIdentity)
    throw bad_config("non-Gaussian marginals need normalize_correlation");
  if (lambda.path_points < 1) throw bad_config("lambda.points must be >= 1");
  if (!(lambda.path_min_ratio > 0.0 && lambda.path_min_ratio <= 1.0))
    throw bad_config("lambda.min_ratio must lie in (0, 1]");
  if (lambda.policy == LambdaPolicy::FixedValue && !(lambda.value >= 0.0)) throw bad_config("lambda.value must be >= 0");
  if (!(lambda.scale > 0.0)) throw bad_config("lambda.scale must be > 0");
  if (!(lambda.ebic_gamma >= 0.0)) throw bad_config("lambda.ebic_gamma must be >= 0");
  if (lambda.theta_irr && !(*lambda.theta_irr > 0.0 && *lambda.theta_irr <= 1.0))
    throw bad_config("lambda.theta_irr must lie in (0, 1]");
  if (!(glasso.tol > 0.0) || glasso.max_iter < 1 || !(glasso.psd_floor >= 0.0))
    throw bad_config("invalid glasso settings");
  deconv.validate();
  if (threads < 0) throw bad_config("threads must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"schema", "name", "pipeline", "graph", "marginal", "normalize_correlation", "grid", "trials",
                       "seed", "lambda", "glasso", "deconv", "diag_policy", "strict_support", "threads", "note"},
                      "config");
  ExperimentConfig c;
  try {
    if (j.contains("schema") && j.at("schema").get<std::string>() != kConfigSchema)
      throw bad_config("unsupported config schema '" + j.at("schema").get<std::string>() + "'");
    for (const char* key : {"pipeline", "graph", "grid", "trials", "seed"})
      if (!j.contains(key)) throw bad_config(std::string("missing required key '") + key + "'");
    read_opt(j, "name", c.name);
    c.pipeline = pipeline_from_string(j.at("pipeline").get<std::string>());

    const json& g = j.at("graph");
    reject_unknown_keys(g, {"kind", "p", "rho1", "rho2"}, "graph");
    read_opt(g, "kind", c.graph.kind);
    read_opt(g, "p", c.graph.p);
    read_opt(g, "rho1", c.graph.rho1);
    read_opt(g, "rho2", c.graph.rho2);

    if (j.contains("marginal")) c.marginal = synth::marginal_kind_from_string(j.at("marginal").get<std::string>());
    read_opt(j, "normalize_correlation", c.normalize_correlation);

    const json& grid = j.at("grid");
    reject_unknown_keys(grid, {"n", "d", "sigma2"}, "grid");
    c.n_values = grid.at("n").get<std::vector<int>>();
    c.d_values = grid.at("d").get<std::vector<int>>();
    c.sigma2_values = grid.at("sigma2").get<std::vector<double>>();
    c.trials = j.at("trials").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("lambda")) {
      const json& l = j.at("lambda");
      reject_unknown_keys(l,
                          {"policy", "value", "scale", "tau_constants", "nonparam_c0", "theta_irr", "criterion",
                           "points", "min_ratio", "target_edges", "ebic_gamma"},
                          "lambda");
      if (l.contains("policy")) c.lambda.policy = lambda_policy_from_string(l.at("policy").get<std::string>());
      read_opt(l, "value", c.lambda.value);
      read_opt(l, "scale", c.lambda.scale);
      if (l.contains("tau_constants")) {
        const auto v = l.at("tau_constants").get<std::vector<double>>();
        if (v.size() != 8) throw bad_config("lambda.tau_constants needs 8 values");
        std::copy(v.begin(), v.end(), c.lambda.tau_constants.begin());
      }
      read_opt(l, "nonparam_c0", c.lambda.nonparam_c0);
      read_opt(l, "theta_irr", c.lambda.theta_irr);
      if (l.contains("criterion")) c.lambda.criterion = path_criterion_from_string(l.at("criterion").get<std::string>());
      read_opt(l, "points", c.lambda.path_points);
      read_opt(l, "min_ratio", c.lambda.path_min_ratio);
      read_opt(l, "target_edges", c.lambda.target_edges);
      read_opt(l, "ebic_gamma", c.lambda.ebic_gamma);
    }
    if (j.contains("glasso")) {
      const json& gl = j.at("glasso");
      reject_unknown_keys(gl, {"tol", "max_iter", "psd_floor", "support_tol"}, "glasso");
      read_opt(gl, "tol", c.glasso.tol);
      read_opt(gl, "max_iter", c.glasso.max_iter);
      read_opt(gl, "psd_floor", c.glasso.psd_floor);
      read_opt(gl, "support_tol", c.glasso.support_tol);
    }
    if (j.contains("deconv")) {
      const json& dc = j.at("deconv");
      reject_unknown_keys(dc,
                          {"a", "gamma", "gamma_c0", "alpha", "quad_tol", "t_max_policy", "delta", "delta_c0",
                           "delta_c1", "max_nodes"},
                          "deconv");
      read_opt(dc, "a", c.deconv.a);
      read_opt(dc, "gamma", c.deconv.gamma);
      read_opt(dc, "gamma_c0", c.deconv.gamma_c0);
      read_opt(dc, "alpha", c.deconv.alpha);
      read_opt(dc, "quad_tol", c.deconv.quad_tol);
      if (dc.contains("t_max_policy"))
        c.deconv.t_max_policy = lookup<deconv::TMaxPolicy>(dc.at("t_max_policy").get<std::string>(),
                                                           {{"absolute", deconv::TMaxPolicy::AbsoluteBound},
                                                            {"oscillatory", deconv::TMaxPolicy::OscillatoryBound}},
                                                           "t_max_policy");
      read_opt(dc, "delta", c.deconv.delta);
      read_opt(dc, "delta_c0", c.deconv.delta_c0);
      read_opt(dc, "delta_c1", c.deconv.delta_c1);
      read_opt(dc, "max_nodes", c.deconv.max_nodes);
    }
    if (j.contains("diag_policy"))
      c.diag_policy = lookup<param::DiagPolicy>(
          j.at("diag_policy").get<std::string>(),
          {{"fixed-to-one", param::DiagPolicy::FixedToOne}, {"bias-corrected", param::DiagPolicy::BiasCorrectedDiag}},
          "diag_policy");
    read_opt(j, "strict_support", c.strict_support);
    read_opt(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw bad_config(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["schema"] = kConfigSchema;
  j["name"] = name;
  j["pipeline"] = harness::to_string(pipeline);
  j["graph"] = {{"kind", graph.kind}, {"p", graph.p}, {"rho1", graph.rho1}, {"rho2", graph.rho2}};
  j["marginal"] = synth::to_string(marginal);
  j["normalize_correlation"] = normalize_correlation;
  j["grid"] = {{"n", n_values}, {"d", d_values}, {"sigma2", sigma2_values}};
  j["trials"] = trials;
  j["seed"] = seed;
  j["lambda"] = {{"policy", harness::to_string(lambda.policy)},
                 {"value", lambda.value},
                 {"scale", lambda.scale},
                 {"tau_constants", std::vector<double>(lambda.tau_constants.begin(), lambda.tau_constants.end())},
                 {"nonparam_c0", lambda.nonparam_c0},
                 {"theta_irr", opt_json(lambda.theta_irr)},
                 {"criterion", harness::to_string(lambda.criterion)},
                 {"points", lambda.path_points},
                 {"min_ratio", lambda.path_min_ratio},
                 {"target_edges", opt_json(lambda.target_edges)},
                 {"ebic_gamma", lambda.ebic_gamma}};
  j["glasso"] = {{"tol", glasso.tol},
                 {"max_iter", glasso.max_iter},
                 {"psd_floor", glasso.psd_floor},
                 {"support_tol", glasso.support_tol}};
  j["deconv"] = {{"a", deconv.a},
                 {"gamma", opt_json(deconv.gamma)},
                 {"gamma_c0", deconv.gamma_c0},
                 {"alpha", deconv.alpha},
                 {"quad_tol", deconv.quad_tol},
                 {"t_max_policy", t_max_policy_name(deconv.t_max_policy)},
                 {"delta", opt_json(deconv.delta)},
                 {"delta_c0", deconv.delta_c0},
                 {"delta_c1", deconv.delta_c1},
                 {"max_nodes", deconv.max_nodes}};
  j["diag_policy"] = diag_policy_name(diag_policy);
  j["strict_support"] = strict_support;
  j["threads"] = threads;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = csv::read_file(path);
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "harness", path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

std::vector<GridCell> grid_cells(const ExperimentConfig& cfg) {
  std::vector<GridCell> cells;
  for (double s2 : cfg.sigma2_values)
    for (int d : cfg.d_values)
      for (int n : cfg.n_values) cells.push_back({n, d, s2});
  return cells;
}

double ecdf_truncation(int n) {
  const double nn = static_cast<double>(n);
  return 1.0 / (4.0 * std::pow(nn, 0.25) * std::sqrt(std::numbers::pi * std::log(nn)));
}

Matrix ecdf_transformed(const Matrix& samples, const std::vector<double>& m, const std::vector<double>& v,
                        double delta) {
  const Eigen::Index n = samples.rows();
  if (static_cast<Eigen::Index>(m.size()) != samples.cols() || static_cast<Eigen::Index>(v.size()) != samples.cols())
    throw Error(ErrorKind::DimensionMismatch, "harness", "need one (m, v) pair per column");
  Matrix out(n, samples.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return samples(a, j) < samples(b, j); });
    for (Eigen::Index lo = 0; lo < n;) {
      Eigen::Index hi = lo + 1;
      while (hi < n && samples(order[hi], j) == samples(order[lo], j)) ++hi;
      // Ranks lo+1..hi share the average rank.
      const double rank = 0.5 * static_cast<double>(lo + 1 + hi);
      const double u = deconv::truncate_cdf(rank / static_cast<double>(n), delta);
      const double h = m[j] + v[j] * normal_quantile(u);
      for (Eigen::Index k = lo; k < hi; ++k) out(order[k], j) = h;
      lo = hi;
    }
  }
  return out;
}

std::vector<double> default_lambda_path(const CovarianceMatrix& sigma_hat, int points, double min_ratio) {
  if (points < 1) throw precondition("path needs at least one point");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw precondition("min_ratio must lie in (0, 1]");
  Matrix off = sigma_hat.entries().cwiseAbs();
  off.diagonal().setZero();
  const double top = off.maxCoeff();
  if (!(top > 0.0) || points == 1) return {top};
  std::vector<double> path(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k)
    path[static_cast<std::size_t>(k)] = top * std::pow(min_ratio, static_cast<double>(k) / (points - 1));
  return path;
}

PathSelection lambda_path_select(const CovarianceMatrix& sigma_hat, const std::vector<double>& path,
                                 PathCriterion criterion, const PathOptions& opts) {
  if (path.empty()) throw precondition("lambda path is empty");
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (!(path[k] >= 0.0) || !std::isfinite(path[k])) throw precondition("lambda path values must be finite and >= 0");
    if (k > 0 && !(path[k] < path[k - 1])) throw precondition("lambda path must be strictly decreasing");
  }
  if (opts.n < 1) throw precondition("BIC needs n >= 1");
  if (criterion == PathCriterion::FixedTarget && !opts.target_edges)
    throw precondition("fixed-target selection needs a target edge count");

  const CovarianceMatrix s = glasso::psd_repair(sigma_hat, opts.glasso.psd_floor);
  PathSelection sel;
  sel.scores.assign(path.size(), std::numeric_limits<double>::quiet_NaN());
  std::optional<glasso::GraphEstimate> prev;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  std::string last_error;
  for (std::size_t k = 0; k < path.size(); ++k) {
    glasso::GlassoProblem prob{s, path[k], opts.glasso.psd_floor, opts.glasso.max_iter, opts.glasso.tol,
                               opts.glasso.support_tol};
    try {
      glasso::GraphEstimate est = glasso::solve(prob, prev ? &*prev : nullptr);
      double score;
      const double edges = static_cast<double>(est.edges.size());
      if (criterion != PathCriterion::FixedTarget) {
        const double nll = glasso::objective(s.entries(), est.theta_hat.entries(), 0.0);
        double per_edge = std::log(static_cast<double>(opts.n));
        if (criterion == PathCriterion::ExtendedBIC)
          per_edge += 4.0 * opts.ebic_gamma * std::log(static_cast<double>(s.p()));
        score = opts.n * nll + per_edge * edges;
      } else {
        score = std::abs(edges - *opts.target_edges);
      }
      sel.scores[k] = score;
      if (std::isfinite(score) && score < best) {
        best = score;
        sel.index = k;
        sel.lambda = path[k];
        sel.estimate = est;
        any = true;
      }
      prev = std::move(est);
    } catch (const std::exception& e) {
      last_error = e.what();
      prev.reset();
    }
  }
  if (!any) throw Error(ErrorKind::AllSolvesFailed, "harness", "every solve on the lambda path failed: " + last_error);
  return sel;
}

namespace {

// Sample data replaces the band-graph ground truth: x is fixed across trials
// and the reference graph stands in for the true support.
struct SampleTruth {
  const SampleBatch* x = nullptr;
  const EdgeSet* reference = nullptr;
};

TrialRecord trial_impl(const ExperimentConfig& cfg, const GridCell& cell, int trial,
                       const std::optional<diag::TheoryReport>& theory, SampleTruth data) {
  TrialRecord rec;
  rec.trial = trial;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const int p = data.x ? static_cast<int>(data.x->dim()) : cfg.graph.p;
    if (cfg.pipeline == Pipeline::BaselineDirect && cell.d < p) {
      rec.status = TrialStatus::Skipped;
      rec.error = "direct baseline needs d >= p";
      return rec;
    }
    std::optional<CovarianceMatrix> sigma;
    EdgeSet truth;
    if (data.x) {
      truth = *data.reference;
    } else {
      const PrecisionMatrix theta = synth::make_band_precision(p, cfg.graph.rho1, cfg.graph.rho2);
      sigma = synth::covariance_from_precision(theta, cfg.normalize_correlation);
      truth = support_and_signs(theta, cfg.glasso.support_tol);
    }

    const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    const SensingSystem sys(synth::make_sensing_matrix(cell.d, p, {derive_seed(trial_seed, 0)}), cell.sigma2);
    std::optional<SampleBatch> generated;
    if (!data.x) {
      synth::MarginalSpec marg;
      marg.kind = cfg.marginal;
      const synth::RngSeed x_seed{derive_seed(trial_seed, 1)};
      generated = cfg.marginal == synth::MarginalKind::GaussianIdentity
                      ? synth::gaussian_samples(*sigma, cell.n, x_seed)
                      : synth::nonparanormal_samples(*sigma, marg, cell.n, x_seed);
    }
    const SampleBatch& x = data.x ? *data.x : *generated;
    const SampleBatch y = synth::sense(x, sys, {derive_seed(trial_seed, 2)});

    CovarianceMatrix sigma_hat;
    switch (cfg.pipeline) {
      case Pipeline::Parametric:
        sigma_hat = param::refined_covariance(y, sys, cfg.diag_policy).sigma_hat;
        break;
      case Pipeline::Nonparametric:
        sigma_hat = npn::estimate_nonparam_covariance(y, sys, cfg.deconv).sigma_hat;
        break;
      case Pipeline::BaselineDirect: {
        const Matrix head = y.data().leftCols(p);
        std::vector<double> m(static_cast<std::size_t>(p)), v(static_cast<std::size_t>(p));
        for (int j = 0; j < p; ++j) {
          const auto col = head.col(j);
          m[j] = col.mean();
          v[j] = std::sqrt((col.array() - m[j]).square().sum() / static_cast<double>(cell.n - 1));
        }
        sigma_hat = npn::empirical_covariance(ecdf_transformed(head, m, v, ecdf_truncation(cell.n)));
        break;
      }
      case Pipeline::BaselineLsNoDeconv: {
        const SampleBatch xhat = deconv::least_squares_reconstruct(y, sys);
        const deconv::NoiseModel noise = deconv::noise_moments(sys);
        std::vector<double> m(static_cast<std::size_t>(p)), v(static_cast<std::size_t>(p));
        for (int j = 0; j < p; ++j) {
          const auto col = xhat.data().col(j);
          const std::vector<double> column(col.begin(), col.end());
          const npn::MomentEstimate mom = npn::moment_estimates(column, noise);
          m[j] = mom.m_hat;
          v[j] = mom.v_hat;
        }
        sigma_hat = npn::empirical_covariance(ecdf_transformed(xhat.data(), m, v, ecdf_truncation(cell.n)));
        break;
      }
    }

    auto theta_irr = [&]() {
      if (cfg.lambda.theta_irr) return *cfg.lambda.theta_irr;
      if (!theory) throw precondition("lambda rule needs theta_irr: no ground-truth report and none configured");
      if (!theory->irrepresentable_holds)
        throw precondition("lambda rule needs theta_irr > 0 but the irrepresentable condition fails");
      return std::min(1.0, theory->theta_irr);
    };
    glasso::GraphEstimate est;
    const glasso::GlassoProblem base{sigma_hat, 0.0, cfg.glasso.psd_floor, cfg.glasso.max_iter, cfg.glasso.tol,
                                     cfg.glasso.support_tol};
    auto solve_at = [&](double lambda) {
      glasso::GlassoProblem prob = base;
      prob.lambda = lambda;
      return glasso::solve(prob);
    };
    switch (cfg.lambda.policy) {
      case LambdaPolicy::FixedValue:
        est = solve_at(cfg.lambda.value);
        break;
      case LambdaPolicy::ParamRule: {
        if (!sigma) throw precondition("param-rule needs the true covariance; use another lambda policy for sample data");
        const double tau = param::tau_infinity(*sigma, cell.n, cell.d, p, cell.sigma2, cfg.lambda.tau_constants);
        est = solve_at(cfg.lambda.scale * glasso::lambda_param_rule(tau, theta_irr()));
        break;
      }
      case LambdaPolicy::NonparamRule: {
        const double beta = deconv::beta_exponent(cfg.deconv.a, cfg.deconv.alpha);
        est = solve_at(cfg.lambda.scale * glasso::lambda_nonparam_rule(cell.n, cell.d, p, beta, theta_irr(),
                                                                      cfg.lambda.nonparam_c0));
        break;
      }
      case LambdaPolicy::PathSweep: {
        PathOptions po;
        po.n = cell.n;
        po.glasso = cfg.glasso;
        po.ebic_gamma = cfg.lambda.ebic_gamma;
        po.target_edges = cfg.lambda.target_edges ? cfg.lambda.target_edges : std::optional<int>(truth.size());
        est = lambda_path_select(sigma_hat,
                                 default_lambda_path(sigma_hat, cfg.lambda.path_points, cfg.lambda.path_min_ratio),
                                 cfg.lambda.criterion, po)
                  .estimate;
        break;
      }
    }
    const diag::RecoveryMetrics metrics = diag::recall_precision(truth, est.edges);
    rec.recall = metrics.recall;
    rec.precision = metrics.precision;
    rec.sign_consistent = metrics.sign_consistent;
    rec.predicted_edges = metrics.predicted_edges;
    rec.lambda = est.lambda_used;
    rec.converged = est.converged;
    rec.psd_repaired = est.psd_repaired;
  } catch (const std::exception& e) {
    rec.status = TrialStatus::Failed;
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

TrialRecord run_trial(const ExperimentConfig& cfg, const GridCell& cell, int trial,
                      const std::optional<diag::TheoryReport>& theory) {
  return trial_impl(cfg, cell, trial, theory, {});
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("COVGRAPH_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {
void run_cells(const ExperimentConfig& cfg, SampleTruth data, ExperimentResult& res);
}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = cfg;
  json echo = cfg.to_json();
  // Thread count is an execution setting; results and their hash must not depend on it.
  echo.erase("threads");
  res.config_hash = fnv1a_hex(echo.dump());

  const PrecisionMatrix theta = synth::make_band_precision(cfg.graph.p, cfg.graph.rho1, cfg.graph.rho2);
  res.true_edges = static_cast<int>(support_and_signs(theta, cfg.glasso.support_tol).size());
  try {
    diag::IrrepOptions io;
    io.augmented = !cfg.strict_support;
    // The report is taken on the matrix whose inverse generates the data.
    const CovarianceMatrix sigma = synth::covariance_from_precision(theta, cfg.normalize_correlation);
    const PrecisionMatrix generating(sigma.entries().llt().solve(Matrix::Identity(cfg.graph.p, cfg.graph.p)));
    res.theory = diag::irrepresentable_report(generating, io);
  } catch (const std::exception& e) {
    res.theory_error = e.what();
  }

  run_cells(cfg, {}, res);
  res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

PathSelection reference_graph(const SampleBatch& x, const ExperimentConfig& cfg) {
  const int n = static_cast<int>(x.n()), p = static_cast<int>(x.dim());
  if (n < 2) throw precondition("sample data needs at least 2 rows");
  std::vector<double> m(static_cast<std::size_t>(p)), v(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const auto col = x.data().col(j);
    m[j] = col.mean();
    v[j] = std::sqrt((col.array() - m[j]).square().sum() / static_cast<double>(n - 1));
  }
  const CovarianceMatrix s = npn::empirical_covariance(ecdf_transformed(x.data(), m, v, ecdf_truncation(n)));
  PathOptions po;
  po.n = n;
  po.glasso = cfg.glasso;
  po.ebic_gamma = cfg.lambda.ebic_gamma;
  po.target_edges = cfg.lambda.target_edges;
  const PathCriterion criterion =
      cfg.lambda.criterion == PathCriterion::FixedTarget && !po.target_edges ? PathCriterion::BIC : cfg.lambda.criterion;
  return lambda_path_select(s, default_lambda_path(s, cfg.lambda.path_points, cfg.lambda.path_min_ratio), criterion, po);
}

ExperimentResult run_sample_experiment(const ExperimentConfig& cfg_in, const SampleBatch& x) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  cfg.graph.p = static_cast<int>(x.dim());
  cfg.n_values = {static_cast<int>(x.n())};
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  res.samples_hash = fnv1a_hex(csv::format_matrix(x.data()));
  json echo = cfg.to_json();
  echo.erase("threads");
  echo["samples_hash"] = res.samples_hash;
  res.config_hash = fnv1a_hex(echo.dump());
  res.theory_error = "sample data has no ground-truth precision matrix";

  const PathSelection ref = reference_graph(x, cfg);
  res.reference = ref.estimate.edges;
  res.reference_lambda = ref.lambda;
  res.true_edges = static_cast<int>(res.reference->size());
  run_cells(cfg, {&x, &*res.reference}, res);
  res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace {

void run_cells(const ExperimentConfig& cfg, SampleTruth data, ExperimentResult& res) {
  const std::vector<GridCell> cells = grid_cells(cfg);
  const std::size_t total = cells.size() * static_cast<std::size_t>(cfg.trials);
  res.trials.resize(total);
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(cfg.threads)), total));
  res.threads_used = workers;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t k = next.fetch_add(1); k < total; k = next.fetch_add(1)) {
      const std::size_t c = k / static_cast<std::size_t>(cfg.trials);
      const int t = static_cast<int>(k % static_cast<std::size_t>(cfg.trials));
      TrialRecord rec = trial_impl(cfg, cells[c], t, res.theory, data);
      rec.cell = static_cast<int>(c);
      res.trials[k] = std::move(rec);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary s;
    s.cell = cells[c];
    std::vector<double> recall, precision, lambdas;
    int signs = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      const TrialRecord& r = res.trials[c * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)];
      s.seconds += r.seconds;
      if (r.status == TrialStatus::Failed) ++s.failed;
      if (r.status == TrialStatus::Skipped) ++s.skipped;
      if (r.status != TrialStatus::Ok) continue;
      ++s.ok;
      recall.push_back(r.recall);
      precision.push_back(r.precision);
      lambdas.push_back(r.lambda);
      signs += r.sign_consistent ? 1 : 0;
    }
    s.degraded = s.failed > 0;
    mean_sd(recall, s.recall_mean, s.recall_sd);
    mean_sd(precision, s.precision_mean, s.precision_sd);
    double unused = 0.0;
    mean_sd(lambdas, s.lambda_mean, unused);
    s.sign_rate = s.ok > 0 ? static_cast<double>(signs) / s.ok : 0.0;
    res.cells.push_back(s);
  }
}

}  // namespace

json ExperimentResult::to_json(bool include_runtime) const {
  json j;
  j["schema"] = kResultSchema;
  j["version"] = COVGRAPH_VERSION;
  j["rng"] = kRngAlgorithm;
  j["config"] = config.to_json();
  j["config"].erase("threads");
  j["config_hash"] = config_hash;
  j["seed"] = config.seed;
  json truth = {{"p", config.graph.p}, {"true_edges", true_edges}, {"source", reference ? "samples" : "band"}};
  if (reference) {
    json edges = json::array();
    for (const auto& [a, b] : reference->edges()) edges.push_back({a, b});
    truth["reference_lambda"] = reference_lambda;
    truth["samples_hash"] = samples_hash;
    truth["edges"] = edges;
  }
  if (theory) {
    truth["theory"] = {{"kappa_sigma", theory->kappa_sigma},
                       {"kappa_gamma", theory->kappa_gamma},
                       {"theta_irr", theory->theta_irr},
                       {"deg", theory->deg},
                       {"irrepresentable_holds", theory->irrepresentable_holds},
                       {"support_pairs", theory->support_pairs},
                       {"augmented", !config.strict_support}};
  } else {
    truth["theory"] = nullptr;
    truth["theory_error"] = theory_error;
  }
  j["truth"] = truth;
  json cs = json::array();
  for (const CellSummary& s : cells)
    cs.push_back({{"n", s.cell.n},
                  {"d", s.cell.d},
                  {"sigma2", s.cell.sigma2},
                  {"ok", s.ok},
                  {"failed", s.failed},
                  {"skipped", s.skipped},
                  {"degraded", s.degraded},
                  {"recall_mean", s.recall_mean},
                  {"recall_sd", s.recall_sd},
                  {"precision_mean", s.precision_mean},
                  {"precision_sd", s.precision_sd},
                  {"sign_rate", s.sign_rate},
                  {"lambda_mean", s.lambda_mean}});
  j["cells"] = cs;
  json ts = json::array();
  for (const TrialRecord& r : trials)
    ts.push_back({{"cell", r.cell},
                  {"trial", r.trial},
                  {"status", harness::to_string(r.status)},
                  {"error", r.error},
                  {"recall", r.recall},
                  {"precision", r.precision},
                  {"sign_consistent", r.sign_consistent},
                  {"predicted_edges", r.predicted_edges},
                  {"lambda", r.lambda},
                  {"converged", r.converged},
                  {"psd_repaired", r.psd_repaired}});
  j["trials"] = ts;
  if (include_runtime) {
    json cell_seconds = json::array();
    for (const CellSummary& s : cells) cell_seconds.push_back(s.seconds);
    j["runtime"] = {{"total_seconds", total_seconds}, {"threads", threads_used}, {"cell_seconds", cell_seconds}};
  }
  return j;
}

std::string ExperimentResult::cell_table_csv() const {
  std::string out = "# " + std::string(kResultSchema) + " cells\n";
  out += "n,d,sigma2,recall_mean,recall_sd,precision_mean,precision_sd,sign_rate,ok,failed,skipped,degraded\n";
  for (const CellSummary& s : cells) {
    out += std::to_string(s.cell.n) + "," + std::to_string(s.cell.d) + "," + num(s.cell.sigma2) + "," +
           num(s.recall_mean) + "," + num(s.recall_sd) + "," + num(s.precision_mean) + "," + num(s.precision_sd) +
           "," + num(s.sign_rate) + "," + std::to_string(s.ok) + "," + std::to_string(s.failed) + "," +
           std::to_string(s.skipped) + "," + (s.degraded ? "1" : "0") + "\n";
  }
  return out;
}

std::string ExperimentResult::trial_table_csv() const {
  std::string out = "# " + std::string(kResultSchema) + " trials\n";
  out += "cell,n,d,sigma2,trial,status,recall,precision,sign_consistent,predicted_edges,lambda,converged\n";
  for (const TrialRecord& r : trials) {
    const GridCell& c = cells[static_cast<std::size_t>(r.cell)].cell;
    out += std::to_string(r.cell) + "," + std::to_string(c.n) + "," + std::to_string(c.d) + "," + num(c.sigma2) + "," +
           std::to_string(r.trial) + "," + to_string(r.status) + "," + num(r.recall) + "," + num(r.precision) + "," +
           (r.sign_consistent ? "1" : "0") + "," + std::to_string(r.predicted_edges) + "," + num(r.lambda) + "," +
           (r.converged ? "1" : "0") + "\n";
  }
  return out;
}

SampleBatch ingest_sample_csv(const std::filesystem::path& path, const IngestOptions& opts) {
  Matrix m = csv::read_matrix(path, csv::ReadOptions{opts.header});
  if (opts.orientation == Orientation::SamplesAsCols) m.transposeInPlace();
  if (m.rows() < 1 || m.cols() < 1) throw Error(ErrorKind::Parse, "harness", path.string() + ": no data");
  if (opts.standardize) {
    if (m.rows() < 2) throw precondition("standardizing needs at least two samples");
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double mu = m.col(j).mean();
      m.col(j).array() -= mu;
      const double sd = std::sqrt(m.col(j).squaredNorm() / static_cast<double>(m.rows() - 1));
      if (!(sd > 0.0)) throw precondition("column " + std::to_string(j) + " is constant and cannot be standardized");
      m.col(j) /= sd;
    }
  }
  return SampleBatch(std::move(m), opts.kind, "ingest:" + path.filename().string());
}

}  // namespace covgraph::harness
