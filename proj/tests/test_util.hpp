#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "covgraph/core.hpp"
#include "covgraph/rng.hpp"
#include "covgraph/synth.hpp"

namespace covgraph::testing {

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Matrix random_spd(int p, std::uint64_t seed, double ridge = 0.5) {
  const Matrix b = random_matrix(p, p, seed);
  return b * b.transpose() / p + ridge * Matrix::Identity(p, p);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

struct EntryStats {
  Matrix mean;
  Matrix se;  // standard error of the mean
};

/// Mean and standard error of estimator(Y, sys) over independent redraws of
/// (A, X, W) with X ~ N(0, sigma).
template <class Estimator>
EntryStats redraw_stats(const CovarianceMatrix& sigma, int n, int d, double sigma2, int redraws, std::uint64_t seed,
                        Estimator&& estimator) {
  const int p = static_cast<int>(sigma.p());
  Matrix sum = Matrix::Zero(p, p), sum2 = Matrix::Zero(p, p);
  for (int r = 0; r < redraws; ++r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    const SensingSystem sys(synth::make_sensing_matrix(d, p, {derive_seed(s, 0)}), sigma2);
    const SampleBatch x = synth::gaussian_samples(sigma, n, {derive_seed(s, 1)});
    const SampleBatch y = synth::sense(x, sys, {derive_seed(s, 2)});
    const Matrix est = estimator(y, sys);
    sum += est;
    sum2 += est.cwiseProduct(est);
  }
  const double r = redraws;
  Matrix mean = sum / r;
  Matrix var = (sum2 / r - mean.cwiseProduct(mean)) * (r / (r - 1));
  return {mean, (var.cwiseMax(0.0) / r).cwiseSqrt()};
}

/// Per-test scratch directory, fresh on each call.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("COVGRAPH_TEST_TMP");
  std::filesystem::path base = root ? root : std::filesystem::temp_directory_path() / "covgraph_tests";
  auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace covgraph::testing
