#include "covgraph/npn_cov.hpp"

#include <algorithm>
#include <cmath>

namespace covgraph::npn {

MomentEstimate moment_estimates(std::span<const double> column, const deconv::NoiseModel& noise) {
  const auto n = static_cast<double>(column.size());
  if (column.size() < 2) throw Error(ErrorKind::Precondition, "npn_cov", "moment estimates need n >= 2");
  double mean = 0.0;
  for (double v : column) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : column) ss += (v - mean) * (v - mean);
  const double corrected = ss / (n - 1.0) - n / (n - 1.0) * noise.approx_variance;
  MomentEstimate out;
  out.m_hat = mean;
  out.clamped = !(corrected > 0.0);
  out.v_hat = out.clamped ? 0.0 : std::sqrt(corrected);
  return out;
}

double transform_from_cdf(const TransformEstimate& t, double raw_cdf) {
  const double u = deconv::truncate_cdf(raw_cdf, t.cdf.delta_ndp);
  return t.m_hat + t.v_hat * normal_quantile(u);
}

double apply_transform(const TransformEstimate& t, double x) { return transform_from_cdf(t, t.cdf.evaluate(x)); }

TransformEstimate estimate_transform(const SampleBatch& xhat, int coordinate, const deconv::NoiseModel& noise,
                                     const deconv::DeconvConfig& cfg) {
  const auto col = xhat.data().col(coordinate);
  std::vector<double> column(col.begin(), col.end());
  const MomentEstimate mom = moment_estimates(column, noise);
  return TransformEstimate{mom.m_hat, mom.v_hat, mom.clamped, deconv::estimate_marginal_cdf(xhat, coordinate, noise, cfg)};
}

Matrix transformed_samples(const SampleBatch& xhat, const std::vector<TransformEstimate>& transforms,
                           NonparamDiagnostics* diag) {
  if (static_cast<Eigen::Index>(transforms.size()) != xhat.dim())
    throw Error(ErrorKind::DimensionMismatch, "npn_cov",
                "need one transform per coordinate (" + std::to_string(xhat.dim()) + "), got " +
                    std::to_string(transforms.size()));
  Matrix h(xhat.n(), xhat.dim());
  for (Eigen::Index j = 0; j < xhat.dim(); ++j) {
    const auto col = xhat.data().col(j);
    std::vector<double> xs(col.begin(), col.end());
    const auto report = transforms[j].cdf.cdf->evaluate(xs);
    for (Eigen::Index s = 0; s < xhat.n(); ++s) h(s, j) = transform_from_cdf(transforms[j], report.values[s]);
    if (diag) {
      diag->non_monotone.push_back(deconv::count_non_monotone(xs, report.values));
      diag->quadrature_nodes += report.nodes;
    }
  }
  return h;
}

CovarianceMatrix empirical_covariance(const Matrix& h) {
  const Vector mu = h.colwise().mean();
  const Matrix centered = h.rowwise() - mu.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(h.rows());
  return CovarianceMatrix(0.5 * (cov + cov.transpose()));
}

CovarianceMatrix npn_covariance(const SampleBatch& xhat, const std::vector<TransformEstimate>& transforms) {
  return empirical_covariance(transformed_samples(xhat, transforms));
}

CovarianceMatrix oracle_npn_covariance(const SampleBatch& x, const std::vector<std::function<double(double)>>& h) {
  if (static_cast<Eigen::Index>(h.size()) != x.dim())
    throw Error(ErrorKind::DimensionMismatch, "npn_cov", "need one exact transform per coordinate");
  Matrix values(x.n(), x.dim());
  for (Eigen::Index j = 0; j < x.dim(); ++j)
    for (Eigen::Index s = 0; s < x.n(); ++s) values(s, j) = h[j](x.data()(s, j));
  return empirical_covariance(values);
}

NonparamEstimate estimate_nonparam_covariance_from_xhat(const SampleBatch& xhat, const deconv::NoiseModel& noise,
                                                        const deconv::DeconvConfig& cfg) {
  cfg.validate();
  std::vector<TransformEstimate> transforms;
  transforms.reserve(static_cast<std::size_t>(xhat.dim()));
  NonparamDiagnostics diag;
  for (Eigen::Index j = 0; j < xhat.dim(); ++j) {
    transforms.push_back(estimate_transform(xhat, static_cast<int>(j), noise, cfg));
    diag.m_hat.push_back(transforms.back().m_hat);
    diag.v_hat.push_back(transforms.back().v_hat);
    diag.v_clamped.push_back(transforms.back().v_clamped);
  }
  if (!transforms.empty()) {
    diag.gamma = transforms.front().cdf.cdf->gamma();
    diag.delta_ndp = transforms.front().cdf.delta_ndp;
  }
  const Matrix h = transformed_samples(xhat, transforms, &diag);
  return NonparamEstimate{empirical_covariance(h), std::move(diag)};
}

NonparamEstimate estimate_nonparam_covariance(const SampleBatch& y, const SensingSystem& sys,
                                              const deconv::DeconvConfig& cfg) {
  const SampleBatch xhat = deconv::least_squares_reconstruct(y, sys);
  return estimate_nonparam_covariance_from_xhat(xhat, deconv::noise_moments(sys), cfg);
}

}  // namespace covgraph::npn
