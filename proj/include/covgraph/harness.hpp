#pragma once

// Monte Carlo experiment orchestration over a (n, d, sigma2) grid.
//
// Randomness: trial t uses trial_seed = derive_seed(seed, t), shared by every
// grid cell (common random numbers). Within a trial, A, X and W draw from
// derive_seed(trial_seed, 0), (.., 1), (.., 2). All fills are row-major, so
// cells that differ only in n or d see nested prefixes of the same draws.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covgraph/core.hpp"
#include "covgraph/deconv.hpp"
#include "covgraph/diagnostics.hpp"
#include "covgraph/glasso.hpp"
#include "covgraph/param_cov.hpp"
#include "covgraph/synth.hpp"

namespace covgraph::harness {

inline constexpr const char* kResultSchema = "covgraph-experiment v1";
inline constexpr const char* kConfigSchema = "covgraph-config v1";

enum class Pipeline { Parametric, Nonparametric, BaselineDirect, BaselineLsNoDeconv };
enum class LambdaPolicy { FixedValue, ParamRule, NonparamRule, PathSweep };
enum class PathCriterion { BIC, ExtendedBIC, FixedTarget };

std::string to_string(Pipeline v);
std::string to_string(LambdaPolicy v);
std::string to_string(PathCriterion v);
Pipeline pipeline_from_string(const std::string& s);
LambdaPolicy lambda_policy_from_string(const std::string& s);
PathCriterion path_criterion_from_string(const std::string& s);

struct GraphSpec {
  std::string kind = "band";  // only band graphs are generated
  int p = 50;
  double rho1 = 1.0;
  double rho2 = 0.4;
};

struct LambdaSpec {
  LambdaPolicy policy = LambdaPolicy::PathSweep;
  double value = 0.1;  // FixedValue
  double scale = 1.0;  // multiplies ParamRule / NonparamRule outputs
  param::TauConstants tau_constants = param::kUnitTauConstants;
  double nonparam_c0 = 1.0;
  std::optional<double> theta_irr;  // overrides the ground-truth value in the rules
  PathCriterion criterion = PathCriterion::BIC;
  int path_points = 20;
  double path_min_ratio = 0.01;
  std::optional<int> target_edges;  // FixedTarget; unset means the true edge count
  double ebic_gamma = 0.5;          // ExtendedBIC
};

struct GlassoSettings {
  double tol = 1e-7;
  int max_iter = 500;
  double psd_floor = glasso::kDefaultPsdFloor;
  double support_tol = glasso::kDefaultSupportTol;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Pipeline pipeline = Pipeline::Parametric;
  GraphSpec graph;
  synth::MarginalKind marginal = synth::MarginalKind::GaussianIdentity;
  bool normalize_correlation = true;
  std::vector<int> n_values;
  std::vector<int> d_values;
  std::vector<double> sigma2_values;
  int trials = 1;
  std::uint64_t seed = 0;
  LambdaSpec lambda;
  GlassoSettings glasso;
  deconv::DeconvConfig deconv;
  param::DiagPolicy diag_policy = param::DiagPolicy::FixedToOne;
  bool strict_support = false;  // irrepresentability without diagonal pairs
  int threads = 0;              // 0: COVGRAPH_THREADS, else hardware concurrency

  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::size_t cell_count() const { return n_values.size() * d_values.size() * sigma2_values.size(); }
};

ExperimentConfig load_config(const std::filesystem::path& path);

struct GridCell {
  int n = 0;
  int d = 0;
  double sigma2 = 0.0;
};

/// Cells in row-major (sigma2, d, n) order: n varies fastest.
std::vector<GridCell> grid_cells(const ExperimentConfig& cfg);

enum class TrialStatus { Ok, Failed, Skipped };
std::string to_string(TrialStatus s);

struct TrialRecord {
  int cell = 0;
  int trial = 0;
  TrialStatus status = TrialStatus::Ok;
  std::string error;
  double recall = 0.0;
  double precision = 0.0;
  bool sign_consistent = false;
  int predicted_edges = 0;
  double lambda = 0.0;
  bool converged = false;
  bool psd_repaired = false;
  double seconds = 0.0;
};

struct CellSummary {
  GridCell cell;
  int ok = 0, failed = 0, skipped = 0;
  bool degraded = false;  // at least one trial failed
  double recall_mean = 0.0, recall_sd = 0.0;
  double precision_mean = 0.0, precision_sd = 0.0;
  double sign_rate = 0.0;
  double lambda_mean = 0.0;
  double seconds = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string config_hash;
  std::optional<diag::TheoryReport> theory;  // of the ground truth; absent above the Fisher ceiling
  std::string theory_error;
  int true_edges = 0;
  std::vector<CellSummary> cells;
  std::vector<TrialRecord> trials;  // cell-major, trial-minor
  /// Set by run_sample_experiment: the graph learned from the direct samples,
  /// which replaces the band-graph truth when scoring trials.
  std::optional<EdgeSet> reference;
  double reference_lambda = 0.0;
  std::string samples_hash;
  double total_seconds = 0.0;
  int threads_used = 1;

  /// Timing and thread count are omitted unless requested, so equal inputs
  /// produce byte-identical output.
  nlohmann::json to_json(bool include_runtime = false) const;
  std::string cell_table_csv() const;
  std::string trial_table_csv() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Runs one trial of one cell; exposed for tests and the Python bindings.
TrialRecord run_trial(const ExperimentConfig& cfg, const GridCell& cell, int trial,
                      const std::optional<diag::TheoryReport>& theory);

struct PathOptions {
  int n = 1;  // sample count in the BIC term
  std::optional<int> target_edges;
  double ebic_gamma = 0.5;
  GlassoSettings glasso;
};

struct PathSelection {
  double lambda = 0.0;
  std::size_t index = 0;
  glasso::GraphEstimate estimate;
  std::vector<double> scores;  // NaN where a solve failed
};

/// Strictly decreasing path, solved with warm starts. BIC picks the minimum of
/// n (-logdet Theta + tr(S Theta)) + log(n) |edges|; ExtendedBIC adds
/// 4 ebic_gamma log(p) |edges|; FixedTarget picks the edge count closest to the
/// target. Ties go to the larger lambda.
PathSelection lambda_path_select(const CovarianceMatrix& sigma_hat, const std::vector<double>& path,
                                 PathCriterion criterion, const PathOptions& opts);

/// Log-spaced from max |S_ij| (i != j) down to min_ratio times that.
std::vector<double> default_lambda_path(const CovarianceMatrix& sigma_hat, int points, double min_ratio);

/// Evaluation on measured data: x (n samples of p variables) is observed
/// directly once to learn a reference graph (ECDF-transformed covariance, the
/// noiseless limit of the nonparametric estimate), then compressed per trial
/// with a fresh A and noise from the grid's (d, sigma2) and scored against that
/// reference. cfg.graph.p and cfg.n_values are taken from x.
ExperimentResult run_sample_experiment(const ExperimentConfig& cfg, const SampleBatch& x);

/// The reference graph of run_sample_experiment. The path criterion is
/// cfg.lambda.criterion, except FixedTarget without a target falls back to BIC.
PathSelection reference_graph(const SampleBatch& x, const ExperimentConfig& cfg);

/// Truncation used with empirical CDFs: 1 / (4 n^{1/4} sqrt(pi log n)).
double ecdf_truncation(int n);

/// Column-wise m_j + v_j Phi^{-1}(F_n^tr(x)) with F_n the empirical CDF (rank / n,
/// ties averaged) truncated to [delta, 1 - delta].
Matrix ecdf_transformed(const Matrix& samples, const std::vector<double>& m, const std::vector<double>& v,
                        double delta);

enum class Orientation { SamplesAsRows, SamplesAsCols };

struct IngestOptions {
  Orientation orientation = Orientation::SamplesAsRows;
  bool header = false;
  bool standardize = false;  // column mean 0, sample standard deviation 1
  SampleKind kind = SampleKind::LatentX;
};

SampleBatch ingest_sample_csv(const std::filesystem::path& path, const IngestOptions& opts = {});

/// Worker count: explicit request if > 0, else COVGRAPH_THREADS, else hardware concurrency.
int resolve_threads(int requested);

}  // namespace covgraph::harness
