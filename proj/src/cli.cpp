#include "covgraph/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "covgraph/csv.hpp"
#include "covgraph/deconv.hpp"
#include "covgraph/diagnostics.hpp"
#include "covgraph/glasso.hpp"
#include "covgraph/harness.hpp"
#include "covgraph/npn_cov.hpp"
#include "covgraph/param_cov.hpp"
#include "covgraph/rng.hpp"
#include "covgraph/synth.hpp"

namespace covgraph::cli {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_json(const std::string& path, const json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-")
    out << text;
  else
    csv::write_file_atomic(path, text);
}

SensingSystem load_system(const std::string& a_path, double sigma2) {
  return SensingSystem(csv::read_matrix(a_path), sigma2);
}

json edges_json(const EdgeSet& e) {
  json arr = json::array();
  for (const auto& [i, j] : e.edges()) arr.push_back({i, j, e.sign(i, j).value_or(0)});
  return arr;
}

json theory_json(const diag::TheoryReport& r, bool augmented) {
  return {{"schema", kReportSchema},
          {"kappa_sigma", r.kappa_sigma},
          {"kappa_gamma", r.kappa_gamma},
          {"theta_irr", r.theta_irr},
          {"deg", r.deg},
          {"irrepresentable_holds", r.irrepresentable_holds},
          {"support_pairs", r.support_pairs},
          {"augmented", augmented}};
}

void add_deconv_options(CLI::App* sub, deconv::DeconvConfig& cfg, std::optional<double>& gamma,
                        std::optional<double>& delta) {
  sub->add_option("--ridge-exp", cfg.a, "Ridge exponent a > 0")->capture_default_str();
  sub->add_option("--gamma", gamma, "Ridge parameter (default: rate-based rule)");
  sub->add_option("--gamma-c0", cfg.gamma_c0, "Constant of the default ridge rule")->capture_default_str();
  sub->add_option("--alpha", cfg.alpha, "Smoothness exponent")->capture_default_str();
  sub->add_option("--quad-tol", cfg.quad_tol, "Absolute quadrature tolerance")->capture_default_str();
  sub->add_option("--delta", delta, "CDF truncation level (default: rate-based rule)");
  sub->add_option("--max-nodes", cfg.max_nodes, "Quadrature node budget per evaluation")->capture_default_str();
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph structure estimation from compressed, noisy measurements", "covgraph"};
  app.set_version_flag("--version",
                       std::string("covgraph ") + COVGRAPH_VERSION + "\nrng " + kRngAlgorithm + "\ncsv " +
                           std::string(csv::kSchemaTag.substr(2)) + "\nexperiment " + harness::kResultSchema +
                           "\nconfig " + harness::kConfigSchema + "\nedges " + kEdgesSchema + "\nreport " +
                           kReportSchema);
  app.require_subcommand(1);
  std::function<void()> action;

  // synth
  struct {
    int p = 0;
    std::string graph = "band";
    double rho1 = 1.0, rho2 = 0.4;
    std::string out, sigma_out, x_out, a_out, y_out, marginal = "gaussian";
    bool normalize = false;
    std::optional<int> n, d;
    std::optional<std::uint64_t> seed;
    double sigma2 = 0.0;
  } sy;
  auto* synth_cmd = app.add_subcommand("synth", "Ground-truth precision matrix and optional samples");
  synth_cmd->add_option("--p", sy.p, "Dimension")->required()->check(CLI::Range(2, 1 << 20));
  synth_cmd->add_option("--graph", sy.graph, "Graph family")->check(CLI::IsMember({"band"}))->capture_default_str();
  synth_cmd->add_option("--rho1", sy.rho1, "Diagonal value")->capture_default_str();
  synth_cmd->add_option("--rho2", sy.rho2, "First off-diagonal value")->capture_default_str();
  synth_cmd->add_option("--out", sy.out, "Theta CSV")->required();
  synth_cmd->add_option("--sigma-out", sy.sigma_out, "Covariance CSV");
  synth_cmd->add_flag("--normalize", sy.normalize, "Rescale the covariance to unit diagonal");
  synth_cmd->add_option("--n", sy.n, "Number of latent samples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", sy.seed, "Seed (required with --n)");
  synth_cmd->add_option("--marginal", sy.marginal, "Marginal law")
      ->check(CLI::IsMember({"gaussian", "uniform", "exponential", "gauss-mixture"}))
      ->capture_default_str();
  synth_cmd->add_option("--x-out", sy.x_out, "Latent sample CSV");
  synth_cmd->add_option("--d", sy.d, "Measurements per sample")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sigma2", sy.sigma2, "Measurement noise variance")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--a-out", sy.a_out, "Sensing matrix CSV");
  synth_cmd->add_option("--y-out", sy.y_out, "Observation CSV");
  synth_cmd->callback([&] {
    action = [&] {
      const PrecisionMatrix theta = synth::make_band_precision(sy.p, sy.rho1, sy.rho2);
      const bool generative = sy.n.has_value();
      if (generative && !sy.seed) throw UsageError("synth: --seed is required when generating samples");
      if (!generative && (sy.d || !sy.x_out.empty() || !sy.y_out.empty() || !sy.a_out.empty()))
        throw UsageError("synth: sample outputs need --n");
      if (sy.d && (sy.a_out.empty() || sy.y_out.empty())) throw UsageError("synth: --d needs --a-out and --y-out");
      if (!sy.y_out.empty() && !sy.d) throw UsageError("synth: --y-out needs --d");
      const auto kind = synth::marginal_kind_from_string(sy.marginal);
      const bool normalize = sy.normalize || kind != synth::MarginalKind::GaussianIdentity;
      const CovarianceMatrix sigma = synth::covariance_from_precision(theta, normalize);
      csv::write_matrix(sy.out, theta.entries());
      if (!sy.sigma_out.empty()) csv::write_matrix(sy.sigma_out, sigma.entries());
      if (!generative) return;
      const std::uint64_t seed = *sy.seed;
      synth::MarginalSpec marg;
      marg.kind = kind;
      const synth::RngSeed x_seed{derive_seed(seed, 1)};
      const SampleBatch x = kind == synth::MarginalKind::GaussianIdentity
                                ? synth::gaussian_samples(sigma, *sy.n, x_seed)
                                : synth::nonparanormal_samples(sigma, marg, *sy.n, x_seed);
      if (!sy.x_out.empty()) synth::write_batch(sy.x_out, x);
      if (sy.d) {
        const SensingSystem sys(synth::make_sensing_matrix(*sy.d, sy.p, {derive_seed(seed, 0)}), sy.sigma2);
        csv::write_matrix(sy.a_out, sys.a());
        synth::write_batch(sy.y_out, synth::sense(x, sys, {derive_seed(seed, 2)}));
      }
    };
  });

  // estimate-param
  struct {
    std::string y, a, out, report, diag = "fixed-to-one";
    double sigma2 = 0.0;
  } ep;
  auto* ep_cmd = app.add_subcommand("estimate-param", "Refined covariance estimate from Y and A");
  ep_cmd->add_option("--y", ep.y, "Observation CSV (samples as rows)")->required();
  ep_cmd->add_option("--a", ep.a, "Sensing matrix CSV")->required();
  ep_cmd->add_option("--sigma2", ep.sigma2, "Noise variance")->required()->check(CLI::NonNegativeNumber);
  ep_cmd->add_option("--diag", ep.diag, "Diagonal policy")
      ->check(CLI::IsMember({"fixed-to-one", "bias-corrected"}))
      ->capture_default_str();
  ep_cmd->add_option("--out", ep.out, "Covariance CSV")->required();
  ep_cmd->add_option("--report", ep.report, "JSON report path ('-' for stdout)");
  ep_cmd->callback([&] {
    action = [&] {
      const SensingSystem sys = load_system(ep.a, ep.sigma2);
      const SampleBatch y = synth::read_batch(ep.y, SampleKind::ObservedY);
      const auto policy = ep.diag == "fixed-to-one" ? param::DiagPolicy::FixedToOne : param::DiagPolicy::BiasCorrectedDiag;
      const param::ParamCovEstimate est = param::refined_covariance(y, sys, policy);
      csv::write_matrix(ep.out, est.sigma_hat.entries());
      if (!ep.report.empty())
        write_json(ep.report,
                   {{"schema", kReportSchema},
                    {"scaling_constant", est.scaling_constant},
                    {"diag_policy", ep.diag},
                    {"positive_definite", est.sigma_hat.is_positive_definite()}},
                   out);
    };
  });

  // estimate-nonparam
  struct {
    std::string y, a, out, report;
    double sigma2 = 0.0;
    deconv::DeconvConfig cfg;
    std::optional<double> gamma, delta;
  } en;
  auto* en_cmd = app.add_subcommand("estimate-nonparam", "Nonparanormal covariance estimate from Y and A");
  en_cmd->add_option("--y", en.y, "Observation CSV (samples as rows)")->required();
  en_cmd->add_option("--a", en.a, "Sensing matrix CSV")->required();
  en_cmd->add_option("--sigma2", en.sigma2, "Noise variance")->required()->check(CLI::NonNegativeNumber);
  en_cmd->add_option("--out", en.out, "Covariance CSV")->required();
  en_cmd->add_option("--report", en.report, "JSON diagnostics path ('-' for stdout)");
  add_deconv_options(en_cmd, en.cfg, en.gamma, en.delta);
  en_cmd->callback([&] {
    action = [&] {
      en.cfg.gamma = en.gamma;
      en.cfg.delta = en.delta;
      en.cfg.validate();
      const SensingSystem sys = load_system(en.a, en.sigma2);
      const SampleBatch y = synth::read_batch(en.y, SampleKind::ObservedY);
      const npn::NonparamEstimate est = npn::estimate_nonparam_covariance(y, sys, en.cfg);
      csv::write_matrix(en.out, est.sigma_hat.entries());
      if (!en.report.empty()) {
        const auto& dg = est.diagnostics;
        std::vector<int> clamped(dg.v_clamped.begin(), dg.v_clamped.end());
        write_json(en.report,
                   {{"schema", kReportSchema},
                    {"gamma", dg.gamma},
                    {"delta", dg.delta_ndp},
                    {"m_hat", dg.m_hat},
                    {"v_hat", dg.v_hat},
                    {"v_clamped", clamped},
                    {"non_monotone", dg.non_monotone},
                    {"quadrature_nodes", dg.quadrature_nodes}},
                   out);
      }
    };
  });

  // deconv-cdf
  struct {
    std::string samples, out, at;
    int column = 0;
    double sigma2 = 0.0;
    long d = 0, p = 0;
    double lo = 0.0, hi = 1.0;
    int points = 0;
    deconv::DeconvConfig cfg;
    std::optional<double> gamma, delta;
  } dc;
  auto* dc_cmd = app.add_subcommand("deconv-cdf", "Deconvolution CDF of one reconstructed coordinate");
  dc_cmd->add_option("--samples", dc.samples, "Reconstructed sample CSV (samples as rows)")->required();
  dc_cmd->add_option("--column", dc.column, "Coordinate index")->check(CLI::NonNegativeNumber);
  dc_cmd->add_option("--sigma2", dc.sigma2, "Measurement noise variance")->required()->check(CLI::NonNegativeNumber);
  dc_cmd->add_option("--d", dc.d, "Measurements per sample")->required();
  dc_cmd->add_option("--p", dc.p, "Latent dimension")->required();
  dc_cmd->add_option("--at", dc.at, "Comma-separated evaluation points");
  dc_cmd->add_option("--lo", dc.lo, "Grid start");
  dc_cmd->add_option("--hi", dc.hi, "Grid end");
  dc_cmd->add_option("--points", dc.points, "Grid size (>= 2)");
  dc_cmd->add_option("--out", dc.out, "Three-column CSV (x, F, truncated F)")->required();
  add_deconv_options(dc_cmd, dc.cfg, dc.gamma, dc.delta);
  dc_cmd->callback([&] {
    action = [&] {
      dc.cfg.gamma = dc.gamma;
      dc.cfg.delta = dc.delta;
      dc.cfg.validate();
      std::vector<double> xs;
      if (!dc.at.empty()) {
        const Matrix row = csv::parse_matrix(dc.at);
        if (row.rows() != 1) throw UsageError("deconv-cdf: --at takes one comma-separated list");
        xs.assign(row.data(), row.data() + row.size());
      } else {
        if (dc.points < 2 || !(dc.hi > dc.lo)) throw UsageError("deconv-cdf: need --at or --lo < --hi with --points >= 2");
        for (int k = 0; k < dc.points; ++k) xs.push_back(dc.lo + (dc.hi - dc.lo) * k / (dc.points - 1));
      }
      const SampleBatch xhat = synth::read_batch(dc.samples, SampleKind::ReconstructedXhat);
      if (dc.column >= xhat.dim()) throw UsageError("deconv-cdf: --column out of range");
      const deconv::NoiseModel noise = deconv::noise_moments(dc.sigma2, dc.d, dc.p);
      const deconv::MarginalCdfEstimate est = deconv::estimate_marginal_cdf(xhat, dc.column, noise, dc.cfg);
      const deconv::EvaluationReport rep = est.cdf->evaluate(xs);
      Matrix table(static_cast<Eigen::Index>(xs.size()), 3);
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        table(r, 0) = xs[k];
        table(r, 1) = rep.values[k];
        table(r, 2) = deconv::truncate_cdf(rep.values[k], est.delta_ndp);
      }
      csv::write_matrix(dc.out, table);
    };
  });

  // glasso
  struct {
    std::string sigma, out, edges, rule;
    std::optional<double> lambda;
    double tau = 0.0, theta_irr = 1.0, n = 0, d = 0, p = 0, beta = 0.5, c0 = 1.0;
    glasso::GlassoProblem prob;
  } gl;
  auto* gl_cmd = app.add_subcommand("glasso", "Graphical lasso on a covariance CSV");
  gl_cmd->add_option("--sigma", gl.sigma, "Covariance CSV")->required();
  auto* lambda_opt = gl_cmd->add_option("--lambda", gl.lambda, "Penalty")->check(CLI::NonNegativeNumber);
  auto* rule_opt = gl_cmd->add_option("--rule", gl.rule, "Penalty rule instead of --lambda")
                       ->check(CLI::IsMember({"param", "nonparam"}));
  lambda_opt->excludes(rule_opt);
  gl_cmd->add_option("--tau", gl.tau, "param rule: deviation bound");
  gl_cmd->add_option("--theta-irr", gl.theta_irr, "Irrepresentability margin")->capture_default_str();
  gl_cmd->add_option("--n", gl.n, "nonparam rule: samples");
  gl_cmd->add_option("--d", gl.d, "nonparam rule: measurements");
  gl_cmd->add_option("--p", gl.p, "nonparam rule: dimension");
  gl_cmd->add_option("--beta", gl.beta, "nonparam rule: exponent")->capture_default_str();
  gl_cmd->add_option("--c0", gl.c0, "nonparam rule: constant")->capture_default_str();
  gl_cmd->add_option("--psd-floor", gl.prob.psd_floor, "Eigenvalue floor")->capture_default_str();
  gl_cmd->add_option("--tol", gl.prob.tol, "Convergence tolerance")->capture_default_str();
  gl_cmd->add_option("--max-iter", gl.prob.max_iter, "Sweep limit")->capture_default_str();
  gl_cmd->add_option("--support-tol", gl.prob.support_tol, "Edge threshold")->capture_default_str();
  gl_cmd->add_option("--out", gl.out, "Theta CSV")->required();
  gl_cmd->add_option("--edges", gl.edges, "Edges JSON ('-' for stdout)");
  gl_cmd->callback([&] {
    action = [&] {
      if (!gl.lambda && gl.rule.empty()) throw UsageError("glasso: need --lambda or --rule");
      double lambda = 0.0;
      if (gl.lambda)
        lambda = *gl.lambda;
      else if (gl.rule == "param")
        lambda = glasso::lambda_param_rule(gl.tau, gl.theta_irr);
      else
        lambda = glasso::lambda_nonparam_rule(gl.n, gl.d, gl.p, gl.beta, gl.theta_irr, gl.c0);
      gl.prob.sigma_hat = CovarianceMatrix(csv::read_matrix(gl.sigma));
      gl.prob.lambda = lambda;
      const glasso::GraphEstimate est = glasso::solve(gl.prob);
      csv::write_matrix(gl.out, est.theta_hat.entries());
      if (!gl.edges.empty())
        write_json(gl.edges,
                   {{"schema", kEdgesSchema},
                    {"p", est.theta_hat.p()},
                    {"lambda", est.lambda_used},
                    {"converged", est.converged},
                    {"iterations", est.iterations},
                    {"kkt_residual", est.kkt_residual},
                    {"psd_repaired", est.psd_repaired},
                    {"edges", edges_json(est.edges)}},
                   out);
    };
  });

  // diagnose
  struct {
    std::string theta, out = "-";
    bool strict = false;
    int ceiling = diag::kDefaultFisherCeiling;
  } dg;
  auto* dg_cmd = app.add_subcommand("diagnose", "Irrepresentability report for a precision matrix");
  dg_cmd->add_option("--theta", dg.theta, "Precision CSV")->required();
  dg_cmd->add_flag("--strict", dg.strict, "Exclude diagonal pairs from the support");
  dg_cmd->add_option("--ceiling", dg.ceiling, "Largest p accepted")->capture_default_str();
  dg_cmd->add_option("--out", dg.out, "Report JSON ('-' for stdout)")->capture_default_str();
  dg_cmd->callback([&] {
    action = [&] {
      diag::IrrepOptions opts;
      opts.augmented = !dg.strict;
      opts.ceiling_p = dg.ceiling;
      const diag::TheoryReport rep = diag::irrepresentable_report(PrecisionMatrix(csv::read_matrix(dg.theta)), opts);
      write_json(dg.out, theory_json(rep, opts.augmented), out);
    };
  });

  // experiment
  struct {
    std::string config, out, samples;
    int threads = 0;
    bool header = false, columns = false, standardize = false;
  } ex;
  auto* ex_cmd = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a config file");
  ex_cmd->add_option("--config", ex.config, "Config JSON")->required();
  ex_cmd->add_option("--out", ex.out, "Output directory")->required();
  ex_cmd->add_option("--threads", ex.threads, "Worker threads (0: COVGRAPH_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  ex_cmd->add_option("--samples", ex.samples, "Measured sample CSV; replaces the synthetic band graph");
  ex_cmd->add_flag("--header", ex.header, "--samples has a header row");
  ex_cmd->add_flag("--samples-as-cols", ex.columns, "--samples stores one sample per column");
  ex_cmd->add_flag("--standardize", ex.standardize, "Standardize each --samples column");
  ex_cmd->callback([&] {
    action = [&] {
      harness::ExperimentConfig cfg = harness::load_config(ex.config);
      if (ex.threads > 0) cfg.threads = ex.threads;
      if (ex.samples.empty() && (ex.header || ex.columns || ex.standardize))
        throw UsageError("experiment: --header, --samples-as-cols and --standardize need --samples");
      harness::ExperimentResult res;
      if (ex.samples.empty()) {
        res = harness::run_experiment(cfg);
      } else {
        harness::IngestOptions io;
        io.header = ex.header;
        io.standardize = ex.standardize;
        io.orientation = ex.columns ? harness::Orientation::SamplesAsCols : harness::Orientation::SamplesAsRows;
        res = harness::run_sample_experiment(cfg, harness::ingest_sample_csv(ex.samples, io));
      }
      const std::filesystem::path dir(ex.out);
      std::filesystem::create_directories(dir);
      csv::write_file_atomic(dir / "results.json", res.to_json().dump(2) + "\n");
      csv::write_file_atomic(dir / "runtime.json", res.to_json(true)["runtime"].dump(2) + "\n");
      csv::write_file_atomic(dir / "cells.csv", res.cell_table_csv());
      csv::write_file_atomic(dir / "trials.csv", res.trial_table_csv());
      int degraded = 0;
      for (const auto& c : res.cells) degraded += c.degraded ? 1 : 0;
      out << "cells " << res.cells.size() << ", degraded " << degraded << ", wrote " << dir.string() << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0 through the same path.
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << json{{"error", std::string(to_string(e.kind()))}, {"module", e.module()}, {"message", e.what()}}.dump()
        << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "runtime"}, {"module", "cli"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace covgraph::cli
