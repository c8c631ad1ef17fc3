#pragma once

// Nonparanormal covariance estimation from reconstructed samples: moment
// correction for the LS noise, the Gaussianizing transform
// h_i(x) = m_i + v_i Phi^{-1}(F_i^tr(x)), and the empirical covariance of h(Xhat).

#include <functional>
#include <vector>

#include "covgraph/core.hpp"
#include "covgraph/deconv.hpp"
#include "covgraph/normal.hpp"

namespace covgraph::npn {

struct MomentEstimate {
  double m_hat = 0.0;
  double v_hat = 0.0;
  bool clamped = false;  // the noise correction drove the variance below zero
};

MomentEstimate moment_estimates(std::span<const double> column, const deconv::NoiseModel& noise);

struct TransformEstimate {
  double m_hat = 0.0;
  double v_hat = 0.0;
  bool v_clamped = false;
  deconv::MarginalCdfEstimate cdf;
};

double apply_transform(const TransformEstimate& t, double x);

/// Transformed value given an already-evaluated raw CDF value.
double transform_from_cdf(const TransformEstimate& t, double raw_cdf);

TransformEstimate estimate_transform(const SampleBatch& xhat, int coordinate, const deconv::NoiseModel& noise,
                                     const deconv::DeconvConfig& cfg);

struct NonparamDiagnostics;

/// Per-coordinate values h_i(Xhat_i^(s)), n x p. Each coordinate's CDF is
/// evaluated at its own n sample points in a single quadrature pass.
Matrix transformed_samples(const SampleBatch& xhat, const std::vector<TransformEstimate>& transforms,
                           NonparamDiagnostics* diag = nullptr);

/// n^{-1} sum_s (h(Xhat^(s)) - mu)(h(Xhat^(s)) - mu)^T.
CovarianceMatrix npn_covariance(const SampleBatch& xhat, const std::vector<TransformEstimate>& transforms);

/// Covariance of already-transformed values, divisor n.
CovarianceMatrix empirical_covariance(const Matrix& h);

/// Reference covariance using the exact transforms on latent samples (test-only role).
CovarianceMatrix oracle_npn_covariance(const SampleBatch& x, const std::vector<std::function<double(double)>>& h);

struct NonparamDiagnostics {
  std::vector<double> m_hat, v_hat;
  std::vector<bool> v_clamped;
  std::vector<int> non_monotone;
  double gamma = 0.0;
  double delta_ndp = 0.0;
  long quadrature_nodes = 0;
};

struct NonparamEstimate {
  CovarianceMatrix sigma_hat;
  NonparamDiagnostics diagnostics;
};

/// LS reconstruction, deconvolution CDFs, transforms and covariance in one call.
NonparamEstimate estimate_nonparam_covariance(const SampleBatch& y, const SensingSystem& sys,
                                              const deconv::DeconvConfig& cfg = {});

/// Same pipeline from reconstructed samples.
NonparamEstimate estimate_nonparam_covariance_from_xhat(const SampleBatch& xhat, const deconv::NoiseModel& noise,
                                                        const deconv::DeconvConfig& cfg = {});

}  // namespace covgraph::npn
