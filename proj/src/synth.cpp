#include "covgraph/synth.hpp"

#include <cmath>
#include <json.hpp>

#include "covgraph/csv.hpp"
#include "covgraph/normal.hpp"
#include "covgraph/rng.hpp"

namespace covgraph::synth {

std::string to_string(MarginalKind kind) {
  switch (kind) {
    case MarginalKind::Uniform01: return "uniform";
    case MarginalKind::ExponentialRate1: return "exponential";
    case MarginalKind::GaussMixture4: return "gauss-mixture";
    case MarginalKind::GaussianIdentity: return "gaussian";
  }
  return "gaussian";
}

MarginalKind marginal_kind_from_string(const std::string& s) {
  if (s == "uniform") return MarginalKind::Uniform01;
  if (s == "exponential") return MarginalKind::ExponentialRate1;
  if (s == "gauss-mixture") return MarginalKind::GaussMixture4;
  if (s == "gaussian") return MarginalKind::GaussianIdentity;
  throw Error(ErrorKind::InvalidInput, "synth", "unknown marginal '" + s + "'");
}

double MarginalSpec::cdf(double x) const {
  switch (kind) {
    case MarginalKind::Uniform01:
      return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x);
    case MarginalKind::ExponentialRate1:
      return x <= 0.0 ? 0.0 : -std::expm1(-x);
    case MarginalKind::GaussMixture4: {
      const double sd = std::sqrt(variance);
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += weights[k] * normal_cdf((x - means[k]) / sd);
      return acc;
    }
    case MarginalKind::GaussianIdentity:
      return normal_cdf(x);
  }
  return 0.0;
}

double MarginalSpec::quantile(double u) const {
  switch (kind) {
    case MarginalKind::Uniform01:
      return u;
    case MarginalKind::ExponentialRate1:
      return -std::log1p(-u);
    case MarginalKind::GaussMixture4: {
      const double sd = std::sqrt(variance);
      double lo = means[0] - 40.0 * sd;
      double hi = means[3] + 40.0 * sd;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < u ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    case MarginalKind::GaussianIdentity:
      return normal_quantile(u);
  }
  return 0.0;
}

double MarginalSpec::gaussianize(double x) const {
  if (kind == MarginalKind::GaussianIdentity) return x;
  return normal_quantile(cdf(x));
}

PrecisionMatrix make_band_precision(int p, double rho1, double rho2) {
  if (p < 2) throw Error(ErrorKind::Precondition, "synth", "band graph needs p >= 2");
  Matrix theta = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    theta(i, i) = rho1;
    if (i + 1 < p) theta(i, i + 1) = theta(i + 1, i) = rho2;
  }
  PrecisionMatrix out(std::move(theta));
  if (!out.is_positive_definite())
    throw Error(ErrorKind::NotPositiveDefinite, "synth",
                "band precision (rho1=" + std::to_string(rho1) + ", rho2=" + std::to_string(rho2) +
                    ") is not positive-definite");
  return out;
}

CovarianceMatrix covariance_from_precision(const PrecisionMatrix& theta, bool normalize_to_correlation) {
  Eigen::LLT<Matrix> llt(theta.entries());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "synth", "precision matrix is not positive-definite");
  Matrix sigma = llt.solve(Matrix::Identity(theta.p(), theta.p()));
  sigma = 0.5 * (sigma + sigma.transpose());
  if (normalize_to_correlation) {
    const Vector inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
    sigma = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    sigma.diagonal().setOnes();
  }
  return CovarianceMatrix(std::move(sigma));
}

namespace {

Matrix lower_cholesky(const CovarianceMatrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma.entries());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "synth", "covariance is not positive-definite");
  return llt.matrixL();
}

}  // namespace

SampleBatch gaussian_samples(const CovarianceMatrix& sigma, int n, RngSeed seed) {
  if (n < 1) throw Error(ErrorKind::Precondition, "synth", "n must be >= 1");
  const Matrix l = lower_cholesky(sigma);
  const auto p = sigma.p();
  Rng rng(seed.value);
  Matrix z(n, p);
  for (int s = 0; s < n; ++s)
    for (Eigen::Index j = 0; j < p; ++j) z(s, j) = rng.normal();
  Matrix x = z * l.transpose();
  return SampleBatch(std::move(x), SampleKind::LatentX, "gaussian seed=" + std::to_string(seed.value));
}

SampleBatch nonparanormal_samples(const CovarianceMatrix& sigma, const MarginalSpec& marg, int n, RngSeed seed) {
  for (Eigen::Index i = 0; i < sigma.p(); ++i)
    if (std::abs(sigma(i, i) - 1.0) > 1e-10)
      throw Error(ErrorKind::Precondition, "synth", "nonparanormal sampling needs a unit-diagonal covariance");
  SampleBatch z = gaussian_samples(sigma, n, seed);
  const std::string prov = "nonparanormal marginal=" + to_string(marg.kind) + " seed=" + std::to_string(seed.value);
  if (marg.kind == MarginalKind::GaussianIdentity) return SampleBatch(z.data(), SampleKind::LatentX, prov);
  Matrix x = z.data().unaryExpr([&](double v) { return marg.quantile(normal_cdf(v)); });
  return SampleBatch(std::move(x), SampleKind::LatentX, prov);
}

SampleBatch sense(const SampleBatch& x, const SensingSystem& sys, RngSeed seed) {
  if (x.dim() != sys.p())
    throw Error(ErrorKind::DimensionMismatch, "synth",
                "sense: samples have length " + std::to_string(x.dim()) + ", A has " + std::to_string(sys.p()) +
                    " columns");
  Matrix y = x.data() * sys.a().transpose();
  if (sys.sigma2() > 0.0) {
    const double sd = std::sqrt(sys.sigma2());
    Rng rng(seed.value);
    for (Eigen::Index s = 0; s < y.rows(); ++s)
      for (Eigen::Index k = 0; k < y.cols(); ++k) y(s, k) += sd * rng.normal();
  }
  return SampleBatch(std::move(y), SampleKind::ObservedY, "sense seed=" + std::to_string(seed.value));
}

Matrix make_sensing_matrix(int d, int p, RngSeed seed) {
  if (d < 1 || p < 1) throw Error(ErrorKind::Precondition, "synth", "sensing matrix needs d, p >= 1");
  Rng rng(seed.value);
  Matrix a(d, p);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  return a;
}

void write_batch(const std::filesystem::path& path, const SampleBatch& batch) {
  csv::write_matrix(path, batch.data());
  nlohmann::json side = {{"schema", "covgraph-batch v1"},
                         {"kind", to_string(batch.kind())},
                         {"n", batch.n()},
                         {"dim", batch.dim()},
                         {"provenance", batch.provenance()}};
  auto side_path = path;
  side_path += ".json";
  csv::write_file_atomic(side_path, side.dump() + "\n");
}

SampleBatch read_batch(const std::filesystem::path& path, SampleKind fallback_kind) {
  Matrix data = csv::read_matrix(path);
  auto side_path = path;
  side_path += ".json";
  SampleKind kind = fallback_kind;
  std::string prov = "file " + path.string();
  if (std::filesystem::exists(side_path)) {
    const auto side = nlohmann::json::parse(csv::read_file(side_path));
    kind = sample_kind_from_string(side.value("kind", to_string(fallback_kind)));
    prov = side.value("provenance", prov);
  }
  return SampleBatch(std::move(data), kind, prov);
}

}  // namespace covgraph::synth
