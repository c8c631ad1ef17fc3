#pragma once

// Graphical lasso with an off-diagonal l1 penalty:
//
//   minimize  -logdet(Theta) + tr(S Theta) + lambda sum_{i != j} |Theta_ij|  over Theta > 0,
//
// solved by block coordinate descent on the dual W = Theta^{-1}, one
// row/column at a time, each block an inner coordinate-descent lasso.
// The diagonal is unpenalized, so W_ii = S_ii at the optimum.

#include <optional>

#include "covgraph/core.hpp"

namespace covgraph::glasso {

inline constexpr double kDefaultPsdFloor = 1e-4;
inline constexpr double kDefaultSupportTol = 1e-6;

struct GlassoProblem {
  CovarianceMatrix sigma_hat;
  double lambda = 0.0;
  double psd_floor = kDefaultPsdFloor;
  int max_iter = 500;
  double tol = 1e-7;
  double support_tol = kDefaultSupportTol;

  void validate() const;
};

struct GraphEstimate {
  PrecisionMatrix theta_hat;
  CovarianceMatrix w_hat;  // Theta_hat^{-1}
  EdgeSet edges;
  double lambda_used = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  bool psd_repaired = false;  // the input had eigenvalues below psd_floor
  double min_input_eigenvalue = 0.0;
};

/// Clips eigenvalues below floor to floor. Returns the input unchanged when
/// nothing needs clipping.
CovarianceMatrix psd_repair(const CovarianceMatrix& sigma_hat, double floor, bool* repaired = nullptr,
                            double* min_eigenvalue = nullptr);

/// Warm start from a previous solution on the same (repaired) matrix, e.g.
/// along a decreasing lambda path.
GraphEstimate solve(const GlassoProblem& problem, const GraphEstimate* warm_start = nullptr);

/// Largest violation of the stationarity conditions at Theta for input S:
///   W_ii = S_ii;  W_ij = S_ij + lambda sign(Theta_ij) if Theta_ij != 0;  |W_ij - S_ij| <= lambda otherwise.
double kkt_residual(const Matrix& s, const Matrix& theta, const Matrix& w, double lambda);

/// -logdet(Theta) + tr(S Theta) + lambda ||Theta||_{off,1}; +inf when Theta is not PD.
double objective(const Matrix& s, const Matrix& theta, double lambda);

/// lambda = 8 tau_inf / theta_irr.
double lambda_param_rule(double tau_inf, double theta_irr);

/// c0 / theta * max(log n / n^{1/4}, log(d-p) / (d-p)^{beta/4}).
double lambda_nonparam_rule(double n, double d, double p, double beta, double theta_irr, double c0);

/// 2 kappa_Gamma (1 + 8/theta) tau_inf.
double min_signal_bound(double tau_inf, double theta_irr, double kappa_gamma);

/// True iff min_{(i,j) in S} |Theta_ij| >= bound; vacuously true for an empty support.
bool min_signal_check(const PrecisionMatrix& theta_true, double bound, double support_tol = 1e-8);
bool min_signal_check(const PrecisionMatrix& theta_true, double tau_inf, double theta_irr, double kappa_gamma);

}  // namespace covgraph::glasso
