#pragma once

// Fisher matrix, irrepresentability and edge-recovery scoring.
//
// Gamma = Sigma (x) Sigma is indexed by ordered pairs: row (i, j) -> i * p + j,
// so Gamma((i,j),(k,l)) = Sigma_ik Sigma_jl.

#include "covgraph/core.hpp"

namespace covgraph::diag {

inline constexpr int kDefaultFisherCeiling = 60;  // Gamma is p^2 x p^2

Matrix fisher_matrix(const CovarianceMatrix& sigma, int ceiling_p = kDefaultFisherCeiling);

struct IrrepOptions {
  // Augmented: S holds the ordered support pairs plus every diagonal pair (i, i).
  // Strict: off-diagonal support pairs only; diagonal pairs fall in S^c.
  bool augmented = true;
  int ceiling_p = kDefaultFisherCeiling;
  double support_tol = kDefaultTol;
};

struct TheoryReport {
  double kappa_sigma = 0.0;
  double kappa_gamma = 0.0;
  double theta_irr = 0.0;  // 1 - ||Gamma_{S^c S} Gamma_SS^{-1}||_{1,1}; <= 0 when the condition fails
  int deg = 0;
  bool irrepresentable_holds = false;
  int support_pairs = 0;  // |S| as used for the Gamma submatrices
};

/// Entries of Gamma are generated on the fly; the full p^2 x p^2 matrix is never formed.
TheoryReport irrepresentable_report(const PrecisionMatrix& theta, const IrrepOptions& opts = {});

struct RecoveryMetrics {
  double recall = 0.0;
  double precision = 0.0;
  bool sign_consistent = false;
  int true_edges = 0;
  int predicted_edges = 0;
  int true_positives = 0;
};

/// Empty prediction gives precision 1; empty truth gives recall 1.
/// sign_consistent requires identical edge sets and equal signs on every edge.
RecoveryMetrics recall_precision(const EdgeSet& truth, const EdgeSet& predicted);

}  // namespace covgraph::diag
