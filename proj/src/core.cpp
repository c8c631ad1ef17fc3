#include "covgraph/core.hpp"

#include <algorithm>
#include <cmath>

namespace covgraph {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::NotPositiveDefinite: return "not-positive-definite";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::SingularSubmatrix: return "singular-submatrix";
    case ErrorKind::CeilingExceeded: return "ceiling-exceeded";
    case ErrorKind::AllSolvesFailed: return "all-solves-failed";
  }
  return "unknown";
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i)
      if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
  return true;
}

namespace {

void require_square_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw Error(ErrorKind::DimensionMismatch, "core_model", std::string(what) + " must be square");
  if (!m.allFinite())
    throw Error(ErrorKind::InvalidInput, "core_model", std::string(what) + " has non-finite entries");
  if (!is_symmetric(m))
    throw Error(ErrorKind::InvalidInput, "core_model", std::string(what) + " is not symmetric");
}

// Exact symmetrization after the tolerance check.
Matrix symmetrized(Matrix m) {
  Matrix s = 0.5 * (m + m.transpose());
  return s;
}

}  // namespace

CovarianceMatrix::CovarianceMatrix(Matrix entries) {
  require_square_symmetric(entries, "covariance matrix");
  entries_ = symmetrized(std::move(entries));
}

bool CovarianceMatrix::has_positive_diagonal() const {
  return (entries_.diagonal().array() > 0.0).all();
}

bool CovarianceMatrix::is_positive_definite() const {
  Eigen::LLT<Matrix> llt(entries_);
  return llt.info() == Eigen::Success;
}

PrecisionMatrix::PrecisionMatrix(Matrix entries) {
  require_square_symmetric(entries, "precision matrix");
  entries_ = symmetrized(std::move(entries));
}

bool PrecisionMatrix::is_positive_definite() const {
  Eigen::LLT<Matrix> llt(entries_);
  return llt.info() == Eigen::Success;
}

bool EdgeSet::contains(int i, int j) const {
  if (i > j) std::swap(i, j);
  return edges_.count({i, j}) > 0;
}

void EdgeSet::add(int i, int j, int sign) {
  if (i == j) throw Error(ErrorKind::InvalidInput, "core_model", "self-loop edge");
  if (i < 0 || j < 0 || i >= p_ || j >= p_)
    throw Error(ErrorKind::InvalidInput, "core_model", "edge index out of range");
  if (i > j) std::swap(i, j);
  edges_.insert({i, j});
  if (sign != 0) signs_[{i, j}] = sign > 0 ? 1 : -1;
}

std::optional<int> EdgeSet::sign(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = signs_.find({i, j});
  if (it == signs_.end()) return std::nullopt;
  return it->second;
}

SensingSystem::SensingSystem(Matrix a, double sigma2) : a_(std::move(a)), sigma2_(sigma2) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw Error(ErrorKind::InvalidInput, "core_model", "sigma2 must be finite and >= 0");
  if (a_.rows() < 1 || a_.cols() < 1)
    throw Error(ErrorKind::DimensionMismatch, "core_model", "sensing matrix must be non-empty");
  if (!a_.allFinite())
    throw Error(ErrorKind::InvalidInput, "core_model", "sensing matrix has non-finite entries");
}

std::string to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::LatentX: return "LatentX";
    case SampleKind::ObservedY: return "ObservedY";
    case SampleKind::ReconstructedXhat: return "ReconstructedXhat";
  }
  return "LatentX";
}

SampleKind sample_kind_from_string(const std::string& s) {
  if (s == "LatentX") return SampleKind::LatentX;
  if (s == "ObservedY") return SampleKind::ObservedY;
  if (s == "ReconstructedXhat") return SampleKind::ReconstructedXhat;
  throw Error(ErrorKind::Parse, "core_model", "unknown sample kind '" + s + "'");
}

SampleBatch::SampleBatch(Matrix data, SampleKind kind, std::string provenance)
    : data_(std::move(data)), kind_(kind), provenance_(std::move(provenance)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw Error(ErrorKind::InvalidInput, "core_model", "sample batch needs n >= 1 and dim >= 1");
}

double matrix_norm(const Matrix& m, Norm which) {
  if (!m.allFinite())
    throw Error(ErrorKind::InvalidInput, "core_model", "matrix_norm: non-finite entries");
  if (m.size() == 0) return 0.0;
  switch (which) {
    case Norm::InfElementwise:
      return m.cwiseAbs().maxCoeff();
    case Norm::OffL1:
    case Norm::OffFrobenius: {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          if (i != j) acc += which == Norm::OffL1 ? std::abs(m(i, j)) : m(i, j) * m(i, j);
      return which == Norm::OffL1 ? acc : std::sqrt(acc);
    }
    case Norm::OneOne:
      return m.cwiseAbs().colwise().sum().maxCoeff();
    case Norm::InfInf:
      return m.cwiseAbs().rowwise().sum().maxCoeff();
    case Norm::Operator: {
      Eigen::JacobiSVD<Matrix> svd(m);
      return svd.singularValues()(0);
    }
    case Norm::Frobenius:
      return m.norm();
  }
  return 0.0;
}

EdgeSet support_and_signs(const PrecisionMatrix& theta, double tol) {
  const auto p = static_cast<int>(theta.p());
  EdgeSet edges(p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < j; ++i) {
      const double v = theta(i, j);
      if (std::abs(v) > tol) edges.add(i, j, v > 0 ? 1 : -1);
    }
  return edges;
}

int degree_max(const PrecisionMatrix& theta, double tol) {
  int best = 0;
  for (Eigen::Index j = 0; j < theta.p(); ++j) {
    int count = 0;
    for (Eigen::Index i = 0; i < theta.p(); ++i)
      if (std::abs(theta(i, j)) > tol) ++count;
    best = std::max(best, count);
  }
  return best;
}

}  // namespace covgraph
