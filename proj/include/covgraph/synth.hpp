#pragma once

// Ground-truth graphs, sample generation under Y = A X + W, and the
// nonparanormal marginal transforms used by the synthetic experiments.

#include <cstdint>
#include <filesystem>
#include <string>

#include "covgraph/core.hpp"

namespace covgraph::synth {

enum class MarginalKind { Uniform01, ExponentialRate1, GaussMixture4, GaussianIdentity };

std::string to_string(MarginalKind kind);
MarginalKind marginal_kind_from_string(const std::string& s);

struct MarginalSpec {
  MarginalKind kind = MarginalKind::GaussianIdentity;
  // GaussMixture4 components.
  double means[4] = {-0.5, -0.25, 0.25, 0.5};
  double variance = 1e-2;
  double weights[4] = {0.25, 0.25, 0.25, 0.25};

  double cdf(double x) const;
  /// Analytic for Uniform01 / ExponentialRate1; bisection to 1e-12 for the mixture.
  double quantile(double u) const;
  /// h(x) = Phi^{-1}(F(x)), the exact Gaussianizing transform.
  double gaussianize(double x) const;
};

struct RngSeed {
  std::uint64_t value = 0;
};

PrecisionMatrix make_band_precision(int p, double rho1, double rho2);

/// Sigma = Theta^{-1}; optionally rescaled to unit diagonal (a correlation
/// matrix). Rescaling keeps the support of Theta unchanged.
CovarianceMatrix covariance_from_precision(const PrecisionMatrix& theta, bool normalize_to_correlation = false);

SampleBatch gaussian_samples(const CovarianceMatrix& sigma, int n, RngSeed seed);

SampleBatch nonparanormal_samples(const CovarianceMatrix& sigma, const MarginalSpec& marg, int n, RngSeed seed);

SampleBatch sense(const SampleBatch& x, const SensingSystem& sys, RngSeed seed);

/// d x p matrix with i.i.d. N(0, 1) entries, filled row by row.
Matrix make_sensing_matrix(int d, int p, RngSeed seed);

/// CSV rows plus a one-line JSON sidecar at "<path>.json" (kind, provenance).
void write_batch(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch read_batch(const std::filesystem::path& path, SampleKind fallback_kind);

}  // namespace covgraph::synth
