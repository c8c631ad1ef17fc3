#pragma once

// Covariance estimation of X from compressed observations Y = A X + W with
// Gaussian A (the parametric pipeline's first stage).
//
// Scaling convention: observations follow Y = A X + W with A_ij ~ N(0, 1) and
// W ~ N(0, sigma^2 I). The estimators work in the normalized model
//
//   Y~ = Y / sqrt(d) = A~ X + W~,   A~ = A / sqrt(d),   W~ ~ N(0, (sigma^2 / d) I),
//
// where A~^T A~ has expectation I. With S~ = n^{-1} sum Y~ Y~^T:
//
//   naive            A~^T S~ A~                 mean (d+1)/d Sigma + (p/d) I + (sigma^2/d) I
//   bias-corrected   d/(d+1) naive - (p + sigma^2)/(d+1) I
//   refined          I + d/(d+1) [naive]_off
//
// The refined off-diagonal block is unbiased for Sigma_off when the expectation
// is taken over A, X and W; in raw units the factor applied to [A^T S A]_off is
// 1 / (d (d+1)).

#include <array>

#include "covgraph/core.hpp"

namespace covgraph::param {

enum class DiagPolicy { FixedToOne, BiasCorrectedDiag };

struct ParamCovEstimate {
  CovarianceMatrix sigma_hat;
  double scaling_constant = 0.0;  // factor applied to [A^T S A]_off (raw A)
  DiagPolicy diag_policy = DiagPolicy::FixedToOne;
};

CovarianceMatrix naive_covariance(const SampleBatch& y, const SensingSystem& sys);

CovarianceMatrix bias_corrected_covariance(const SampleBatch& y, const SensingSystem& sys);

ParamCovEstimate refined_covariance(const SampleBatch& y, const SensingSystem& sys,
                                    DiagPolicy policy = DiagPolicy::FixedToOne);

/// Constants c0..c7 of the deviation bound; all default to 1.
using TauConstants = std::array<double, 8>;
inline constexpr TauConstants kUnitTauConstants = {1, 1, 1, 1, 1, 1, 1, 1};

/// High-probability bound on ||Sigma_hat - Sigma||_inf for the refined
/// estimator, evaluated term by term. Diagnostic only; never gates estimation.
double tau_infinity(const CovarianceMatrix& sigma_true, double n, double d, double p, double sigma2,
                    const TauConstants& c = kUnitTauConstants);

}  // namespace covgraph::param
