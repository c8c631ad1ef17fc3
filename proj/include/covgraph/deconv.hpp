#pragma once

// Least-squares reconstruction of X from Y and the deconvolution estimator of
// each marginal CDF from the reconstructed (noisy) samples.
//
// After reconstruction, Xhat = X + w with w = (A^T A)^{-1} A^T W. Only the
// approximate noise law w_i ~ N(0, sigma^2 / (d - p)) is used. The CDF
// estimate at x is
//
//   F(x) = 1/2 - (n pi)^{-1} sum_s int_0^inf sin(t (Xhat_s - x)) / t * K(t) dt,
//   K(t) = phi(t) / max(phi(t)^2, gamma t^a),  phi(t) = exp(-sigma^2 t^2 / (2 (d - p))).

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "covgraph/core.hpp"

namespace covgraph::deconv {

enum class TMaxPolicy {
  /// Per-sample bound min(2/(a sqrt(gamma) T^{a/2}), Gaussian-tail bound).
  AbsoluteBound,
  /// Additionally uses the oscillatory bound 2 K(T) / (T |u|) for samples at
  /// distance |u| > 0 from the evaluation point (second mean value theorem).
  OscillatoryBound,
};

struct DeconvConfig {
  double a = 2.0;
  /// Ridge parameter. Unset means default_gamma(n, p, sigma2, d, a, gamma_c0).
  std::optional<double> gamma;
  double gamma_c0 = 2e-3;
  double alpha = 0.5;
  double quad_tol = 1e-6;
  TMaxPolicy t_max_policy = TMaxPolicy::OscillatoryBound;
  /// Truncation level. Unset means default_delta_ndp(..., delta_c0, delta_c1).
  std::optional<double> delta;
  double delta_c0 = 0.25;
  double delta_c1 = 1e-3;
  /// Quadrature node budget per evaluation call.
  long max_nodes = 1L << 24;

  void validate() const;
};

inline constexpr double kGammaFloor = 1e-12;

struct NoiseModel {
  double sigma2 = 0.0;
  long d = 0;
  long p = 0;
  double approx_variance = 0.0;  // sigma2 / (d - p)

  /// Gaussian approximation of the characteristic function of w_i.
  double char_fn(double t) const;
};

SampleBatch least_squares_reconstruct(const SampleBatch& y, const SensingSystem& sys);

NoiseModel noise_moments(const SensingSystem& sys);
NoiseModel noise_moments(double sigma2, long d, long p);

double default_gamma(double n, double p, double sigma2, double d, double a, double c0);

/// beta = min(1/2, a/4, (2 alpha + 1)/4).
double beta_exponent(double a, double alpha);

/// c0/((log n) n^{1/4}) + c1 log^2(np)/(sqrt(log(d-p)) (d-p)^{beta/4}), kept in (0, 1/2).
double default_delta_ndp(double n, double p, double d, double beta, double c0, double c1);

/// Diagnostic form of the uniform CDF error rate with unit constants.
double epsilon_x(double n, double p, double d, double sigma2, double a, double alpha);

double truncate_cdf(double value, double delta);

struct EvaluationReport {
  std::vector<double> values;
  double t_max = 0.0;
  double tail_bound = 0.0;
  double quadrature_error = 0.0;  // |I_2N - I_N| summed over segments
  long nodes = 0;
};

/// Deconvolution CDF estimate for one coordinate. Immutable; evaluation keeps
/// all quadrature state local.
class DeconvCdf {
 public:
  DeconvCdf(std::vector<double> samples, const NoiseModel& noise, double gamma, double a, double quad_tol,
            TMaxPolicy policy = TMaxPolicy::OscillatoryBound, long max_nodes = 1L << 24);

  double gamma() const { return gamma_; }
  double a() const { return a_; }
  std::size_t n() const { return samples_.size(); }
  const std::vector<double>& samples() const { return samples_; }

  /// K(t).
  double kernel(double t) const;
  /// Where phi^2 crosses gamma t^a; K increases before, decreases after.
  double switch_point() const { return t_switch_; }
  /// (2 gamma)^{-1/a}.
  double split_point() const;

  /// Upper bound on |tail of I(x)| beyond T, maximized over xs. Requires T >= switch_point().
  double tail_bound(double t, std::span<const double> xs) const;
  double choose_t_max(std::span<const double> xs) const;

  EvaluationReport evaluate(std::span<const double> xs) const;
  double operator()(double x) const;

 private:
  std::vector<double> samples_;  // centered by center_
  double center_ = 0.0;
  double c_ = 0.0;  // sigma^2 / (2 (d - p))
  double gamma_;
  double a_;
  double quad_tol_;
  TMaxPolicy policy_;
  long max_nodes_;
  double t_switch_ = 0.0;
};

/// Convenience single-point evaluation.
double deconv_cdf(std::span<const double> column, double x, const NoiseModel& noise, const DeconvConfig& cfg);

/// Resolved gamma for a column of n samples under cfg (floored at kGammaFloor).
double resolve_gamma(const DeconvConfig& cfg, double n, const NoiseModel& noise);
double resolve_delta(const DeconvConfig& cfg, double n, const NoiseModel& noise);

struct MarginalCdfEstimate {
  int coordinate = 0;
  std::shared_ptr<const DeconvCdf> cdf;
  double delta_ndp = 0.0;
  DeconvConfig config;

  double evaluate(double x) const { return (*cdf)(x); }
  double evaluate_truncated(double x) const { return truncate_cdf(evaluate(x), delta_ndp); }
};

MarginalCdfEstimate estimate_marginal_cdf(const SampleBatch& xhat, int coordinate, const NoiseModel& noise,
                                          const DeconvConfig& cfg);

/// Number of strict decreases of values taken along increasing xs.
int count_non_monotone(std::span<const double> xs, std::span<const double> values);

}  // namespace covgraph::deconv
