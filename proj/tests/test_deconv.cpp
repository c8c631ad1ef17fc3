#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "covgraph/deconv.hpp"
#include "covgraph/synth.hpp"
#include "test_util.hpp"

using namespace covgraph;
using namespace covgraph::deconv;
using covgraph::testing::max_abs_diff;
using covgraph::testing::random_matrix;

namespace {

// ECDF with half weight at ties: the sigma, gamma -> 0 limit of the estimator.
double symmetrized_ecdf(const std::vector<double>& s, double x) {
  double acc = 0.0;
  for (double v : s) acc += v < x ? 1.0 : (v == x ? 0.5 : 0.0);
  return acc / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("least_squares_reconstruct") {
  const int p = 3, n = 7;
  const Matrix x = random_matrix(n, p, 1);
  SUBCASE("stacked identity") {
    Matrix a = Matrix::Zero(2 * p, p);
    a.topRows(p).setIdentity();
    const SampleBatch y(x * a.transpose(), SampleKind::ObservedY);
    const SampleBatch xhat = least_squares_reconstruct(y, SensingSystem(a, 0.0));
    CHECK(xhat.kind() == SampleKind::ReconstructedXhat);
    CHECK(max_abs_diff(xhat.data(), x) < 1e-14);
  }
  SUBCASE("random 6x3 without noise") {
    const Matrix a = random_matrix(6, p, 2);
    const SampleBatch y(x * a.transpose(), SampleKind::ObservedY);
    CHECK(max_abs_diff(least_squares_reconstruct(y, SensingSystem(a, 0.0)).data(), x) < 1e-10);
  }
  SUBCASE("residual is orthogonal to the columns of A") {
    const Matrix a = random_matrix(6, p, 3);
    const SampleBatch y(random_matrix(n, 6, 4), SampleKind::ObservedY);
    const Matrix xhat = least_squares_reconstruct(y, SensingSystem(a, 1.0)).data();
    const Matrix residual = y.data() - xhat * a.transpose();
    CHECK((residual * a).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("errors") {
    const SampleBatch y(random_matrix(n, 3, 5), SampleKind::ObservedY);
    CHECK_THROWS_AS(least_squares_reconstruct(y, SensingSystem(random_matrix(3, 3, 6), 0.0)), Error);
    Matrix rank_deficient = random_matrix(6, p, 7);
    rank_deficient.col(2) = rank_deficient.col(0);
    try {
      least_squares_reconstruct(SampleBatch(random_matrix(n, 6, 8), SampleKind::ObservedY),
                                SensingSystem(rank_deficient, 0.0));
      FAIL("expected a singular-system error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SingularSystem);
    }
  }
}

TEST_CASE("noise_moments") {
  const NoiseModel m = noise_moments(1.0, 200, 50);
  CHECK(m.approx_variance == doctest::Approx(1.0 / 150));
  CHECK(m.char_fn(0.0) == 1.0);
  CHECK(m.char_fn(3.0) == doctest::Approx(std::exp(-9.0 / 300)));
  const NoiseModel quiet = noise_moments(0.0, 10, 5);
  for (double t : {0.0, 1.0, 1e3, 1e8}) CHECK(quiet.char_fn(t) == 1.0);
  CHECK_THROWS_AS(noise_moments(1.0, 50, 50), Error);
}

TEST_CASE("LS-propagated noise variance is close to sigma^2/(d-p)") {
  const int d = 200, p = 50, draws = 5000;
  const Matrix a = synth::make_sensing_matrix(d, p, {11});
  const SensingSystem sys(a, 1.0);
  const SampleBatch x(Matrix::Zero(draws, p), SampleKind::LatentX);
  const Matrix w = least_squares_reconstruct(synth::sense(x, sys, {12}), sys).data();
  const double target = 1.0 / 150;
  for (int j = 0; j < p; j += 7) {
    const double var = w.col(j).squaredNorm() / draws;
    CHECK(std::abs(var - target) <= 0.15 * target);
  }
}

TEST_CASE("default_gamma") {
  CHECK(default_gamma(100, 50, 1.0, 200, 2.0, 1.0) == doctest::Approx(std::log(5000.0) / std::sqrt(150.0)));
  CHECK(std::abs(default_gamma(100, 50, 1.0, 200, 2.0, 1.0) - 0.6954) < 1e-4);
  CHECK(default_gamma(100, 50, 0.0, 200, 2.0, 1.0) == 0.0);
  CHECK(default_gamma(100, 50, 1.0, 200, 2.0, 2.0) == doctest::Approx(2.0 * default_gamma(100, 50, 1.0, 200, 2.0, 1.0)));
  DeconvConfig cfg;
  cfg.gamma_c0 = 1.0;
  CHECK(resolve_gamma(cfg, 100, noise_moments(0.0, 200, 50)) == kGammaFloor);
}

TEST_CASE("beta and delta") {
  CHECK(beta_exponent(2.0, 0.5) == 0.5);
  CHECK(beta_exponent(1.2, 0.5) == doctest::Approx(0.3));
  CHECK(beta_exponent(2.0, 0.0) == 0.25);

  const double m = 200.0;
  const double raw = 1.0 / (std::log(1e4) * 10.0) +
                     std::pow(std::log(1e4 * 50), 2) / (std::sqrt(std::log(m)) * std::pow(m, 0.5 / 4));
  CHECK(raw > 0.5);
  const double delta = default_delta_ndp(1e4, 50, 250, 0.5, 1.0, 1.0);
  CHECK(delta < 0.5);
  CHECK(delta > 0.49);

  // The log^2(np) factor grows with n, so delta only falls in n when d grows with it.
  double prev = 0.5;
  for (double n : {100.0, 1e3, 1e4, 1e5, 1e6}) {
    const double v = default_delta_ndp(n, 50, n + 50, 0.5, 0.25, 1e-3);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(default_delta_ndp(1e6, 50, 250, 0.5, 0.25, 1e-3) > default_delta_ndp(1e3, 50, 250, 0.5, 0.25, 1e-3));
  prev = 0.5;
  for (double d : {100.0, 300.0, 1e3, 1e4, 1e6}) {
    const double v = default_delta_ndp(1000, 50, d, 0.5, 0.25, 1e-3);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(default_delta_ndp(1e12, 50, 1e30, 0.5, 0.25, 1e-3) < 1e-3);
}

TEST_CASE("truncate_cdf") {
  CHECK(truncate_cdf(0.5, 0.02) == 0.5);
  CHECK(truncate_cdf(-0.01, 0.02) == 0.02);
  CHECK(truncate_cdf(0.999, 0.02) == 0.98);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double delta = 0.49 * rng.uniform();
    const double v = truncate_cdf(4.0 * rng.normal(), delta);
    CHECK((v >= delta && v <= 1.0 - delta));
  }
}

TEST_CASE("deconv_cdf at the only sample is one half") {
  const std::vector<double> one = {0.37};
  DeconvConfig cfg;
  for (double s2 : {0.0, 0.5, 2.0}) CHECK(deconv_cdf(one, 0.37, noise_moments(s2, 100, 10), cfg) == 0.5);
}

TEST_CASE("near-noiseless estimator approaches the symmetrized empirical CDF") {
  const std::vector<double> s = {0.1, 0.3, 0.45, 0.6, 0.8, 0.95};
  const DeconvCdf cdf(s, noise_moments(1e-12, 100, 10), 1e-8, 2.0, 1e-5);
  std::vector<double> xs;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) xs.push_back(0.5 * (s[k] + s[k + 1]));
  xs.push_back(-0.3);
  xs.push_back(1.4);
  const EvaluationReport r = cdf.evaluate(xs);
  for (std::size_t k = 0; k < xs.size(); ++k) CHECK(std::abs(r.values[k] - symmetrized_ecdf(s, xs[k])) < 1e-3);
  // At a sample point the half-weight convention applies.
  CHECK(std::abs(cdf(0.45) - symmetrized_ecdf(s, 0.45)) < 1e-3);
}

TEST_CASE("tail truncation respects the analytic bound") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> s(25);
    for (double& v : s) v = rng.normal();
    const double gamma = std::pow(10.0, -1.0 - 3.0 * rng.uniform());
    const double a = 1.5 + rng.uniform();
    const double tol = 1e-5;
    const NoiseModel noise = noise_moments(0.5 * rng.uniform(), 120, 20);
    const DeconvCdf cdf(s, noise, gamma, a, tol, trial % 2 ? TMaxPolicy::AbsoluteBound : TMaxPolicy::OscillatoryBound);
    const std::vector<double> xs = {-1.0, 0.1, 0.7};
    const EvaluationReport r = cdf.evaluate(xs);
    CHECK(r.tail_bound < tol);
    CHECK(r.t_max >= cdf.switch_point());
    // The reported bound never exceeds the power-law envelope.
    CHECK(r.tail_bound <= 2.0 / (a * std::sqrt(gamma) * std::pow(r.t_max, a / 2)) / std::numbers::pi + 1e-15);
  }
}

TEST_CASE("kernel shape") {
  const DeconvCdf cdf({0.0, 1.0}, noise_moments(1.0, 60, 10), 0.05, 2.0, 1e-6);
  const double ts = cdf.switch_point();
  CHECK(cdf.kernel(0.0) == 1.0);
  CHECK(cdf.kernel(0.5 * ts) < cdf.kernel(0.9 * ts));
  CHECK(cdf.kernel(1.1 * ts) > cdf.kernel(2.0 * ts));
  CHECK(cdf.split_point() == doctest::Approx(std::pow(0.1, -0.5)));
}

TEST_CASE("estimated CDF stays bounded on fuzzed inputs") {
  Rng rng(29);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 10 + static_cast<int>(40 * rng.uniform());
    std::vector<double> s(n);
    for (double& v : s) v = rng.uniform() * (1 + 3 * rng.uniform()) + (trial % 3 == 0 ? rng.normal() : 0.0);
    const long d = 60 + static_cast<long>(200 * rng.uniform());
    const NoiseModel noise = noise_moments(2.0 * rng.uniform(), d, 50);
    DeconvConfig cfg;
    cfg.quad_tol = 1e-5;
    const DeconvCdf cdf(s, noise, resolve_gamma(cfg, n, noise), cfg.a, cfg.quad_tol);
    std::vector<double> xs;
    for (int k = 0; k <= 40; ++k) xs.push_back(-2.0 + 0.15 * k);
    const EvaluationReport r = cdf.evaluate(xs);
    for (double v : r.values) CHECK(std::abs(v) <= 5.0);
  }
}

TEST_CASE("quadrature budget exhaustion is reported") {
  const DeconvCdf cdf({0.0, 0.5, 1.0}, noise_moments(1e-12, 100, 10), 1e-12, 2.0, 1e-8,
                      TMaxPolicy::OscillatoryBound, 64);
  try {
    (void)cdf(0.25);
    FAIL("expected a numerical failure");
  } catch (const NumericalFailure& e) {
    CHECK(e.kind() == ErrorKind::NumericalFailure);
    CHECK(e.achieved_error() > 0.0);
  }
}

TEST_CASE("config validation") {
  DeconvConfig cfg;
  cfg.a = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.quad_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.delta = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(DeconvConfig{}.validate());
}

TEST_CASE("marginal estimate and monotonicity counter") {
  const SampleBatch xhat(random_matrix(40, 2, 31), SampleKind::ReconstructedXhat);
  DeconvConfig cfg;
  const MarginalCdfEstimate est = estimate_marginal_cdf(xhat, 1, noise_moments(0.2, 100, 2), cfg);
  CHECK(est.coordinate == 1);
  CHECK((est.delta_ndp > 0.0 && est.delta_ndp < 0.5));
  for (double x : {-5.0, -0.5, 0.0, 0.5, 5.0}) {
    const double t = est.evaluate_truncated(x);
    CHECK((t >= est.delta_ndp && t <= 1.0 - est.delta_ndp));
  }
  const std::vector<double> xs = {0.0, 1.0, 2.0, 3.0}, vals = {0.1, 0.3, 0.2, 0.4};
  CHECK(count_non_monotone(xs, vals) == 1);
  CHECK_THROWS_AS(estimate_marginal_cdf(xhat, 2, noise_moments(0.2, 100, 2), cfg), Error);
}
