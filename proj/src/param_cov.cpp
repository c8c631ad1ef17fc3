#include "covgraph/param_cov.hpp"

#include <algorithm>
#include <cmath>

namespace covgraph::param {

namespace {

void check_dims(const SampleBatch& y, const SensingSystem& sys) {
  if (y.dim() != sys.d())
    throw Error(ErrorKind::DimensionMismatch, "param_cov",
                "Y vectors have length " + std::to_string(y.dim()) + " but A has " + std::to_string(sys.d()) +
                    " rows");
}

// A~^T S~ A~ with S~ built from Y~ = Y / sqrt(d), i.e. (Y A)^T (Y A) / (n d^2).
Matrix naive_matrix(const SampleBatch& y, const SensingSystem& sys) {
  check_dims(y, sys);
  const double d = static_cast<double>(sys.d());
  const Matrix xhat = y.data() * sys.a() / d;
  Matrix m = xhat.transpose() * xhat / static_cast<double>(y.n());
  return 0.5 * (m + m.transpose());
}

}  // namespace

CovarianceMatrix naive_covariance(const SampleBatch& y, const SensingSystem& sys) {
  return CovarianceMatrix(naive_matrix(y, sys));
}

CovarianceMatrix bias_corrected_covariance(const SampleBatch& y, const SensingSystem& sys) {
  const double d = static_cast<double>(sys.d());
  const double p = static_cast<double>(sys.p());
  Matrix m = d / (d + 1.0) * naive_matrix(y, sys);
  m.diagonal().array() -= (p + sys.sigma2()) / (d + 1.0);
  return CovarianceMatrix(std::move(m));
}

ParamCovEstimate refined_covariance(const SampleBatch& y, const SensingSystem& sys, DiagPolicy policy) {
  const double d = static_cast<double>(sys.d());
  const double p = static_cast<double>(sys.p());
  Matrix m = d / (d + 1.0) * naive_matrix(y, sys);
  if (policy == DiagPolicy::FixedToOne) {
    m.diagonal().setOnes();
  } else {
    m.diagonal().array() -= (p + sys.sigma2()) / (d + 1.0);
  }
  return ParamCovEstimate{CovarianceMatrix(std::move(m)), 1.0 / (d * (d + 1.0)), policy};
}

double tau_infinity(const CovarianceMatrix& sigma_true, double n, double d, double p, double sigma2,
                    const TauConstants& c) {
  const Matrix& s = sigma_true.entries();
  const double log_p = std::log(p);
  const double max_col = s.colwise().norm().maxCoeff();
  const double off_f = matrix_norm(s, Norm::OffFrobenius);
  const double inflate = 1.0 + c[2] * p / d;

  const double t1 = c[0] * std::sqrt(d * log_p) / (d + 1.0) * max_col;
  const double t2 = c[1] * log_p / (d + 1.0) * inflate * off_f;
  const double t3 = c[3] * log_p * std::sqrt(d * p) / (std::sqrt(n) * (d + 1.0));
  const double t4 = c[4] * p * std::pow(log_p, 1.5) / (std::sqrt(n) * (d + 1.0)) * inflate;
  const double t5 = c[5] * p * std::sqrt(log_p) / (std::sqrt(d) * (d + 1.0));
  const double t6 = c[6] * sigma2 * log_p / d * (1.0 + c[7] * std::max(std::sqrt(d / n), d / n));
  return t1 + t2 + t3 + t4 + t5 + t6;
}

}  // namespace covgraph::param
