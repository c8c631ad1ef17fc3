#include "covgraph/deconv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace covgraph::deconv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kQuadEps = 1e-8;  // below this the sin(tu)/t -> u limit is used
constexpr int kGaussOrder = 16;

struct GaussLegendre {
  std::array<double, kGaussOrder> nodes{};
  std::array<double, kGaussOrder> weights{};

  GaussLegendre() {
    // Newton iteration on P_n from the Chebyshev guesses.
    const int n = kGaussOrder;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre rule;
  return rule;
}

Error precondition(const std::string& msg) { return Error(ErrorKind::Precondition, "deconv", msg); }

}  // namespace

void DeconvConfig::validate() const {
  if (!(a > 1.0)) throw precondition("a must be > 1");
  if (gamma && !(*gamma > 0.0)) throw precondition("gamma must be > 0");
  if (!(quad_tol > 0.0)) throw precondition("quad_tol must be > 0");
  if (!(alpha > -0.5)) throw precondition("alpha must be > -1/2");
  if (delta && !(*delta > 0.0 && *delta < 0.5)) throw precondition("delta must lie in (0, 1/2)");
  if (max_nodes < kGaussOrder) throw precondition("max_nodes too small");
}

double NoiseModel::char_fn(double t) const { return std::exp(-0.5 * approx_variance * t * t); }

SampleBatch least_squares_reconstruct(const SampleBatch& y, const SensingSystem& sys) {
  if (sys.d() <= sys.p())
    throw precondition("least-squares reconstruction needs d > p (got d=" + std::to_string(sys.d()) +
                       ", p=" + std::to_string(sys.p()) + ")");
  if (y.dim() != sys.d())
    throw Error(ErrorKind::DimensionMismatch, "deconv",
                "Y vectors have length " + std::to_string(y.dim()) + " but A has " + std::to_string(sys.d()) +
                    " rows");
  Eigen::ColPivHouseholderQR<Matrix> qr(sys.a());
  if (qr.rank() < sys.p()) throw Error(ErrorKind::SingularSystem, "deconv", "A^T A is singular (rank-deficient A)");
  Matrix xhat = qr.solve(y.data().transpose()).transpose();
  return SampleBatch(std::move(xhat), SampleKind::ReconstructedXhat, "least-squares from " + y.provenance());
}

NoiseModel noise_moments(double sigma2, long d, long p) {
  if (d <= p) throw precondition("noise moments need d > p");
  if (!(sigma2 >= 0.0)) throw precondition("sigma2 must be >= 0");
  return NoiseModel{sigma2, d, p, sigma2 / static_cast<double>(d - p)};
}

NoiseModel noise_moments(const SensingSystem& sys) { return noise_moments(sys.sigma2(), sys.d(), sys.p()); }

double default_gamma(double n, double p, double sigma2, double d, double a, double c0) {
  if (!(n * p > 1.0)) throw precondition("default_gamma needs n p > 1");
  if (!(d > p)) throw precondition("default_gamma needs d > p");
  return c0 * std::log(n * p) * std::pow(sigma2 / (d - p), a / 4.0);
}

double beta_exponent(double a, double alpha) { return std::min({0.5, a / 4.0, (2.0 * alpha + 1.0) / 4.0}); }

double default_delta_ndp(double n, double p, double d, double beta, double c0, double c1) {
  if (!(d > p)) throw precondition("delta needs d > p");
  if (!(n >= 2.0)) throw precondition("delta needs n >= 2");
  const double m = d - p;
  const double first = c0 / (std::log(n) * std::pow(n, 0.25));
  // log(d - p) vanishes at d - p = 1; the second term is then unbounded.
  const double log_m = std::log(m);
  const double second =
      log_m > 0.0 ? c1 * std::pow(std::log(n * p), 2) / (std::sqrt(log_m) * std::pow(m, beta / 4.0))
                  : std::numeric_limits<double>::infinity();
  return std::min(first + second, std::nextafter(0.5, 0.0));
}

double epsilon_x(double n, double p, double d, double sigma2, double a, double alpha) {
  const double m = d - p;
  const double lnp = std::log(n * p);
  return std::pow(lnp, 2.0 / a) * std::sqrt(sigma2) / std::sqrt(m) + lnp * lnp / std::pow(m, a / 4.0) +
         std::pow(sigma2 / m, (2.0 * alpha + 1.0) / 4.0) + 1.0 / n;
}

double truncate_cdf(double value, double delta) { return std::clamp(value, delta, 1.0 - delta); }

DeconvCdf::DeconvCdf(std::vector<double> samples, const NoiseModel& noise, double gamma, double a, double quad_tol,
                     TMaxPolicy policy, long max_nodes)
    : samples_(std::move(samples)),
      c_(0.5 * noise.approx_variance),
      gamma_(gamma),
      a_(a),
      quad_tol_(quad_tol),
      policy_(policy),
      max_nodes_(max_nodes) {
  if (samples_.empty()) throw precondition("deconvolution needs at least one sample");
  if (!(gamma_ > 0.0)) throw precondition("gamma must be > 0");
  if (!(a_ > 1.0)) throw precondition("a must be > 1");
  if (!(quad_tol_ > 0.0)) throw precondition("quad_tol must be > 0");
  center_ = std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
  for (double& s : samples_) s -= center_;

  // Root of -2 c t^2 = log(gamma) + a log(t); the left side falls and the
  // right side rises, so there is exactly one crossing below gamma^{-1/a}.
  const double hi0 = std::pow(gamma_, -1.0 / a_);
  auto excess = [&](double t) { return -2.0 * c_ * t * t - std::log(gamma_) - a_ * std::log(t); };
  if (c_ == 0.0) {
    t_switch_ = hi0;
  } else {
    double lo = hi0, hi = hi0;
    while (excess(lo) < 0.0) lo *= 0.5;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    t_switch_ = 0.5 * (lo + hi);
  }
}

double DeconvCdf::split_point() const { return std::pow(2.0 * gamma_, -1.0 / a_); }

double DeconvCdf::kernel(double t) const {
  if (t <= 0.0) return 1.0;
  const double log_phi = -c_ * t * t;
  const double log_den = std::max(2.0 * log_phi, std::log(gamma_) + a_ * std::log(t));
  return std::exp(log_phi - log_den);
}

double DeconvCdf::tail_bound(double t, std::span<const double> xs) const {
  // Per-sample bounds on |int_T^inf sin(t u) K(t)/t dt|.
  const double abs_power = 2.0 / (a_ * std::sqrt(gamma_) * std::pow(t, a_ / 2.0));
  double abs_gauss = std::numeric_limits<double>::infinity();
  if (c_ > 0.0) {
    abs_gauss = 1.0 / (gamma_ * std::pow(t, a_ + 1.0)) * std::sqrt(kPi / (4.0 * c_)) * std::erfc(std::sqrt(c_) * t);
  }
  const double abs_bound = std::min(abs_power, abs_gauss);
  const double g = kernel(t) / t;
  const double scale = 1.0 / (kPi * static_cast<double>(samples_.size()));

  double worst = 0.0;
  for (double x : xs) {
    const double xc = x - center_;
    double acc = 0.0;
    for (double s : samples_) {
      const double u = std::abs(s - xc);
      if (u == 0.0) continue;
      double b = abs_bound;
      if (policy_ == TMaxPolicy::OscillatoryBound) b = std::min(b, 2.0 * g / u);
      acc += b;
    }
    worst = std::max(worst, acc * scale);
  }
  return worst;
}

namespace {

double max_frequency(const std::vector<double>& centered, std::span<const double> xs, double center) {
  double smax = 0.0;
  for (double s : centered) smax = std::max(smax, std::abs(s));
  double xmax = 0.0;
  for (double x : xs) xmax = std::max(xmax, std::abs(x - center));
  return std::max(smax + xmax, 1e-3);
}

long nodes_for(double length, double omega) {
  // One GL panel per oscillation period at the first level.
  const double panels = std::ceil(length * omega / (2.0 * kPi));
  return static_cast<long>(std::max(2.0, panels)) * kGaussOrder;
}

}  // namespace

double DeconvCdf::choose_t_max(std::span<const double> xs) const {
  const double omega = max_frequency(samples_, xs, center_);
  double t = std::max({2.0 * t_switch_, split_point(), 1.0});
  const double target = 0.5 * quad_tol_;
  double bound = tail_bound(t, xs);
  while (bound >= target) {
    const double next = 2.0 * t;
    // First refinement level costs three times the base level.
    if (3 * nodes_for(next, omega) > max_nodes_) {
      throw NumericalFailure("deconvolution tail truncation needs more than " + std::to_string(max_nodes_) +
                                 " quadrature nodes for quad_tol=" + std::to_string(quad_tol_),
                             bound);
    }
    t = next;
    bound = tail_bound(t, xs);
  }
  return t;
}

EvaluationReport DeconvCdf::evaluate(std::span<const double> xs) const {
  EvaluationReport report;
  const std::size_t nx = xs.size();
  report.values.assign(nx, 0.5);
  if (nx == 0) return report;

  const double t_max = choose_t_max(xs);
  report.t_max = t_max;
  report.tail_bound = tail_bound(t_max, xs);

  std::vector<double> xc(nx);
  for (std::size_t k = 0; k < nx; ++k) xc[k] = xs[k] - center_;
  const double n = static_cast<double>(samples_.size());
  const double sum_s = std::accumulate(samples_.begin(), samples_.end(), 0.0);
  const double scale = 1.0 / (n * kPi);
  const double omega = max_frequency(samples_, xs, center_);

  std::vector<double> breaks = {0.0};
  for (double b : {split_point(), t_switch_})
    if (b > 0.0 && b < t_max) breaks.push_back(b);
  breaks.push_back(t_max);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double seg_tol = 0.5 * quad_tol_ / static_cast<double>(breaks.size() - 1);

  const auto& gl = gauss_legendre();
  std::vector<double> total(nx, 0.0), coarse(nx), fine(nx);

  // Composite GL over [lo, hi] with `panels` panels, accumulated into out.
  auto integrate = [&](double lo, double hi, long panels, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const double h = (hi - lo) / static_cast<double>(panels);
    for (long pnl = 0; pnl < panels; ++pnl) {
      const double mid = lo + (static_cast<double>(pnl) + 0.5) * h;
      for (int q = 0; q < kGaussOrder; ++q) {
        const double t = mid + 0.5 * h * gl.nodes[q];
        const double w = 0.5 * h * gl.weights[q] * kernel(t) * scale;
        if (t < kQuadEps) {
          for (std::size_t k = 0; k < nx; ++k) out[k] += w * (sum_s - n * xc[k]);
          continue;
        }
        double sum_sin = 0.0, sum_cos = 0.0;
        for (double s : samples_) {
          sum_sin += std::sin(t * s);
          sum_cos += std::cos(t * s);
        }
        const double wt = w / t;
        for (std::size_t k = 0; k < nx; ++k) {
          const double tx = t * xc[k];
          out[k] += wt * (sum_sin * std::cos(tx) - sum_cos * std::sin(tx));
        }
      }
    }
    report.nodes += panels * kGaussOrder;
  };

  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    const double lo = breaks[seg], hi = breaks[seg + 1];
    long panels = nodes_for(hi - lo, omega) / kGaussOrder;
    integrate(lo, hi, panels, coarse);
    double diff = 0.0;
    while (true) {
      if (report.nodes + 2 * panels * kGaussOrder > max_nodes_) {
        throw NumericalFailure("deconvolution quadrature did not reach quad_tol=" + std::to_string(quad_tol_) +
                                   " within " + std::to_string(max_nodes_) + " nodes",
                               diff > 0.0 ? diff : std::numeric_limits<double>::infinity());
      }
      panels *= 2;
      integrate(lo, hi, panels, fine);
      diff = 0.0;
      for (std::size_t k = 0; k < nx; ++k) diff = std::max(diff, std::abs(fine[k] - coarse[k]));
      std::swap(coarse, fine);
      if (diff < seg_tol) break;
    }
    report.quadrature_error += diff;
    for (std::size_t k = 0; k < nx; ++k) total[k] += coarse[k];
  }

  for (std::size_t k = 0; k < nx; ++k) report.values[k] = 0.5 - total[k];
  return report;
}

double DeconvCdf::operator()(double x) const { return evaluate(std::span<const double>(&x, 1)).values.front(); }

double resolve_gamma(const DeconvConfig& cfg, double n, const NoiseModel& noise) {
  double g = cfg.gamma ? *cfg.gamma
                       : default_gamma(n, static_cast<double>(noise.p), noise.sigma2, static_cast<double>(noise.d),
                                       cfg.a, cfg.gamma_c0);
  return std::max(g, kGammaFloor);
}

double resolve_delta(const DeconvConfig& cfg, double n, const NoiseModel& noise) {
  if (cfg.delta) return *cfg.delta;
  return default_delta_ndp(n, static_cast<double>(noise.p), static_cast<double>(noise.d),
                           beta_exponent(cfg.a, cfg.alpha), cfg.delta_c0, cfg.delta_c1);
}

double deconv_cdf(std::span<const double> column, double x, const NoiseModel& noise, const DeconvConfig& cfg) {
  cfg.validate();
  if (noise.d <= noise.p) throw precondition("deconvolution needs d > p");
  const double gamma = resolve_gamma(cfg, static_cast<double>(column.size()), noise);
  DeconvCdf cdf(std::vector<double>(column.begin(), column.end()), noise, gamma, cfg.a, cfg.quad_tol,
                cfg.t_max_policy, cfg.max_nodes);
  return cdf(x);
}

MarginalCdfEstimate estimate_marginal_cdf(const SampleBatch& xhat, int coordinate, const NoiseModel& noise,
                                          const DeconvConfig& cfg) {
  cfg.validate();
  if (coordinate < 0 || coordinate >= xhat.dim()) throw precondition("coordinate out of range");
  const double n = static_cast<double>(xhat.n());
  std::vector<double> column(xhat.data().col(coordinate).begin(), xhat.data().col(coordinate).end());
  auto cdf = std::make_shared<const DeconvCdf>(std::move(column), noise, resolve_gamma(cfg, n, noise), cfg.a,
                                               cfg.quad_tol, cfg.t_max_policy, cfg.max_nodes);
  return MarginalCdfEstimate{coordinate, std::move(cdf), resolve_delta(cfg, n, noise), cfg};
}

int count_non_monotone(std::span<const double> xs, std::span<const double> values) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  int count = 0;
  for (std::size_t k = 1; k < order.size(); ++k)
    if (xs[order[k]] > xs[order[k - 1]] && values[order[k]] < values[order[k - 1]]) ++count;
  return count;
}

}  // namespace covgraph::deconv
