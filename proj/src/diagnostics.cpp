#include "covgraph/diagnostics.hpp"

#include <cmath>
#include <vector>

namespace covgraph::diag {

namespace {

void check_ceiling(Eigen::Index p, int ceiling) {
  if (p > ceiling)
    throw Error(ErrorKind::CeilingExceeded, "diagnostics",
                "p = " + std::to_string(p) + " exceeds the Fisher-matrix ceiling " + std::to_string(ceiling));
}

}  // namespace

Matrix fisher_matrix(const CovarianceMatrix& sigma, int ceiling_p) {
  const Eigen::Index p = sigma.p();
  check_ceiling(p, ceiling_p);
  const Matrix& s = sigma.entries();
  Matrix gamma(p * p, p * p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index k = 0; k < p; ++k) gamma.block(i * p, k * p, p, p) = s(i, k) * s;
  return gamma;
}

TheoryReport irrepresentable_report(const PrecisionMatrix& theta, const IrrepOptions& opts) {
  const Eigen::Index p = theta.p();
  check_ceiling(p, opts.ceiling_p);
  Eigen::LLT<Matrix> llt(theta.entries());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "diagnostics", "Theta is not positive-definite");
  Matrix sigma = llt.solve(Matrix::Identity(p, p));
  sigma = 0.5 * (sigma + sigma.transpose());

  std::vector<std::pair<Eigen::Index, Eigen::Index>> in_s, out_s;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      const bool member = (i == j) ? opts.augmented : std::abs(theta(i, j)) > opts.support_tol;
      (member ? in_s : out_s).emplace_back(i, j);
    }

  TheoryReport rep;
  rep.kappa_sigma = matrix_norm(sigma, Norm::InfInf);
  rep.deg = degree_max(theta, opts.support_tol);
  rep.support_pairs = static_cast<int>(in_s.size());
  if (in_s.empty()) {
    rep.kappa_gamma = 0.0;
    rep.theta_irr = 1.0;
    rep.irrepresentable_holds = true;
    return rep;
  }

  auto gamma = [&](const std::pair<Eigen::Index, Eigen::Index>& r, const std::pair<Eigen::Index, Eigen::Index>& c) {
    return sigma(r.first, c.first) * sigma(r.second, c.second);
  };
  const auto ns = static_cast<Eigen::Index>(in_s.size());
  const auto nc = static_cast<Eigen::Index>(out_s.size());
  Matrix g_ss(ns, ns);
  for (Eigen::Index a = 0; a < ns; ++a)
    for (Eigen::Index b = 0; b < ns; ++b) g_ss(a, b) = gamma(in_s[a], in_s[b]);
  Eigen::FullPivLU<Matrix> lu(g_ss);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw Error(ErrorKind::SingularSubmatrix, "diagnostics", "Gamma_SS is singular");
  const Matrix g_ss_inv = lu.inverse();
  rep.kappa_gamma = matrix_norm(g_ss_inv, Norm::InfInf);

  double ratio = 0.0;
  if (nc > 0) {
    Matrix g_cs(nc, ns);
    for (Eigen::Index a = 0; a < nc; ++a)
      for (Eigen::Index b = 0; b < ns; ++b) g_cs(a, b) = gamma(out_s[a], in_s[b]);
    ratio = matrix_norm(g_cs * g_ss_inv, Norm::OneOne);
  }
  rep.theta_irr = 1.0 - ratio;
  rep.irrepresentable_holds = rep.theta_irr > 0.0;
  return rep;
}

RecoveryMetrics recall_precision(const EdgeSet& truth, const EdgeSet& predicted) {
  if (truth.p() != predicted.p())
    throw Error(ErrorKind::DimensionMismatch, "diagnostics", "edge sets over different p");
  RecoveryMetrics m;
  m.true_edges = static_cast<int>(truth.size());
  m.predicted_edges = static_cast<int>(predicted.size());
  bool signs_agree = true;
  for (const auto& [i, j] : predicted.edges()) {
    if (!truth.contains(i, j)) continue;
    ++m.true_positives;
    if (truth.sign(i, j) != predicted.sign(i, j)) signs_agree = false;
  }
  m.recall = m.true_edges == 0 ? 1.0 : static_cast<double>(m.true_positives) / m.true_edges;
  m.precision = m.predicted_edges == 0 ? 1.0 : static_cast<double>(m.true_positives) / m.predicted_edges;
  m.sign_consistent = signs_agree && m.true_positives == m.true_edges && m.true_positives == m.predicted_edges;
  return m;
}

}  // namespace covgraph::diag
