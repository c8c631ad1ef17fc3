#include "covgraph/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace covgraph::glasso {

namespace {

Error precondition(const std::string& msg) { return Error(ErrorKind::Precondition, "glasso", msg); }

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

void GlassoProblem::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw precondition("lambda must be finite and >= 0");
  if (!(tol > 0.0)) throw precondition("tol must be > 0");
  if (!(psd_floor >= 0.0)) throw precondition("psd_floor must be >= 0");
  if (max_iter < 1) throw precondition("max_iter must be >= 1");
  if (!sigma_hat.entries().allFinite())
    throw Error(ErrorKind::InvalidInput, "glasso", "sigma_hat contains non-finite entries");
  if (sigma_hat.p() < 1) throw precondition("sigma_hat is empty");
}

CovarianceMatrix psd_repair(const CovarianceMatrix& sigma_hat, double floor, bool* repaired,
                            double* min_eigenvalue) {
  if (!(floor >= 0.0)) throw precondition("psd floor must be >= 0");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_hat.entries());
  const Vector& values = eig.eigenvalues();
  if (min_eigenvalue) *min_eigenvalue = values.minCoeff();
  if (values.minCoeff() >= floor) {
    if (repaired) *repaired = false;
    return sigma_hat;
  }
  if (repaired) *repaired = true;
  const Vector clipped = values.cwiseMax(floor);
  Matrix out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return CovarianceMatrix(0.5 * (out + out.transpose()));
}

double kkt_residual(const Matrix& s, const Matrix& theta, const Matrix& w, double lambda) {
  double worst = 0.0;
  const auto p = s.rows();
  for (Eigen::Index j = 0; j < p; ++j) {
    worst = std::max(worst, std::abs(w(j, j) - s(j, j)));
    for (Eigen::Index i = 0; i < p; ++i) {
      if (i == j) continue;
      const double gap = w(i, j) - s(i, j);
      const int sg = sign_of(theta(i, j));
      const double r = sg != 0 ? std::abs(gap - lambda * sg) : std::max(0.0, std::abs(gap) - lambda);
      worst = std::max(worst, r);
    }
  }
  return worst;
}

double objective(const Matrix& s, const Matrix& theta, double lambda) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -logdet + (s.cwiseProduct(theta)).sum() + lambda * matrix_norm(theta, Norm::OffL1);
}

GraphEstimate solve(const GlassoProblem& problem, const GraphEstimate* warm_start) {
  problem.validate();
  GraphEstimate out;
  out.lambda_used = problem.lambda;
  const CovarianceMatrix repaired =
      psd_repair(problem.sigma_hat, problem.psd_floor, &out.psd_repaired, &out.min_input_eigenvalue);
  const Matrix& s = repaired.entries();
  const Eigen::Index p = s.rows();
  const double lambda = problem.lambda;
  const double scale = s.diagonal().cwiseAbs().mean();
  const double w_tol = problem.tol * scale;

  Matrix w = s;
  Matrix beta = Matrix::Zero(p, p);  // column j holds the lasso coefficients for block j (beta(j, j) unused)
  if (warm_start && warm_start->w_hat.p() == p) {
    w = warm_start->w_hat.entries();
    w.diagonal() = s.diagonal();
    const Matrix& th = warm_start->theta_hat.entries();
    for (Eigen::Index j = 0; j < p; ++j) {
      beta.col(j) = -th.col(j) / th(j, j);
      beta(j, j) = 0.0;
    }
  }

  auto build_theta = [&]() {
    Matrix theta = Matrix::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      double wb = 0.0;
      for (Eigen::Index k = 0; k < p; ++k)
        if (k != j) wb += w(k, j) * beta(k, j);
      const double tjj = 1.0 / (w(j, j) - wb);
      theta(j, j) = tjj;
      for (Eigen::Index k = 0; k < p; ++k)
        if (k != j) theta(k, j) = -beta(k, j) * tjj;
    }
    // Entries zero in one column and nonzero in the other are averaged.
    return Matrix(0.5 * (theta + theta.transpose()));
  };

  Vector wb(p);
  const double inner_tol = 0.1 * w_tol;
  Matrix theta;
  Matrix w_inv;
  for (int iter = 1; iter <= problem.max_iter; ++iter) {
    out.iterations = iter;
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      // wb = W_{., -j} beta_j
      wb.setZero();
      for (Eigen::Index k = 0; k < p; ++k)
        if (k != j && beta(k, j) != 0.0) wb += beta(k, j) * w.col(k);
      for (int inner = 0; inner < 10000; ++inner) {
        double delta_max = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const double old = beta(k, j);
          const double r = s(k, j) - (wb(k) - w(k, k) * old);
          const double updated = soft_threshold(r, lambda) / w(k, k);
          if (updated != old) {
            const double diff = updated - old;
            wb += diff * w.col(k);
            beta(k, j) = updated;
            delta_max = std::max(delta_max, std::abs(diff) * w(k, k));
          }
        }
        if (delta_max < inner_tol) break;
      }
      // Fresh product avoids drift from the incremental updates.
      wb.setZero();
      for (Eigen::Index k = 0; k < p; ++k)
        if (k != j && beta(k, j) != 0.0) wb += beta(k, j) * w.col(k);
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j) continue;
        max_change = std::max(max_change, std::abs(wb(k) - w(k, j)));
        w(k, j) = wb(k);
        w(j, k) = wb(k);
      }
    }
    if (max_change < w_tol) {
      theta = build_theta();
      Eigen::LLT<Matrix> llt(theta);
      if (llt.info() == Eigen::Success) {
        w_inv = llt.solve(Matrix::Identity(p, p));
        w_inv = 0.5 * (w_inv + w_inv.transpose());
        out.kkt_residual = kkt_residual(s, theta, w_inv, lambda);
        if (out.kkt_residual < 10.0 * problem.tol) {
          out.converged = true;
          break;
        }
      }
    }
  }
  if (!out.converged) {
    theta = build_theta();
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() == Eigen::Success) {
      w_inv = llt.solve(Matrix::Identity(p, p));
      w_inv = 0.5 * (w_inv + w_inv.transpose());
      out.kkt_residual = kkt_residual(s, theta, w_inv, lambda);
    } else {
      // Fall back to the dual iterate, which stays positive-definite.
      w_inv = w;
      theta = w.llt().solve(Matrix::Identity(p, p));
      theta = 0.5 * (theta + theta.transpose());
      out.kkt_residual = kkt_residual(s, theta, w_inv, lambda);
    }
  }
  out.theta_hat = PrecisionMatrix(std::move(theta));
  out.w_hat = CovarianceMatrix(std::move(w_inv));
  out.edges = support_and_signs(out.theta_hat, problem.support_tol);
  return out;
}

double lambda_param_rule(double tau_inf, double theta_irr) {
  if (!(theta_irr > 0.0 && theta_irr <= 1.0)) throw precondition("theta must lie in (0, 1]");
  if (!(tau_inf >= 0.0)) throw precondition("tau_inf must be >= 0");
  return 8.0 * tau_inf / theta_irr;
}

double lambda_nonparam_rule(double n, double d, double p, double beta, double theta_irr, double c0) {
  if (!(d > p)) throw precondition("lambda rule needs d > p");
  if (!(n >= 2.0)) throw precondition("lambda rule needs n >= 2");
  if (!(theta_irr > 0.0 && theta_irr <= 1.0)) throw precondition("theta must lie in (0, 1]");
  const double m = d - p;
  return c0 / theta_irr * std::max(std::log(n) / std::pow(n, 0.25), std::log(m) / std::pow(m, beta / 4.0));
}

double min_signal_bound(double tau_inf, double theta_irr, double kappa_gamma) {
  return 2.0 * kappa_gamma * (1.0 + 8.0 / theta_irr) * tau_inf;
}

bool min_signal_check(const PrecisionMatrix& theta_true, double bound, double support_tol) {
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < theta_true.p(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = std::abs(theta_true(i, j));
      if (v > support_tol) smallest = std::min(smallest, v);
    }
  return smallest >= bound;
}

bool min_signal_check(const PrecisionMatrix& theta_true, double tau_inf, double theta_irr, double kappa_gamma) {
  return min_signal_check(theta_true, min_signal_bound(tau_inf, theta_irr, kappa_gamma));
}

}  // namespace covgraph::glasso
