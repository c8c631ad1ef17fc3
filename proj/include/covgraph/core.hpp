#pragma once

// Shared domain types, matrix norms and graph quantities.

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "covgraph/error.hpp"

namespace covgraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-8;

/// Symmetric p x p covariance. Symmetry is enforced on construction; positivity
/// of the diagonal is not, because unbiased estimators legitimately produce
/// zero or negative diagonals (see has_positive_diagonal()).
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;
  explicit CovarianceMatrix(Matrix entries);

  Eigen::Index p() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  bool has_positive_diagonal() const;
  bool is_positive_definite() const;

 private:
  Matrix entries_;
};

class PrecisionMatrix {
 public:
  PrecisionMatrix() = default;
  explicit PrecisionMatrix(Matrix entries);

  Eigen::Index p() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  /// Checked by Cholesky success.
  bool is_positive_definite() const;

 private:
  Matrix entries_;
};

using Edge = std::pair<int, int>;  // always stored with first < second

class EdgeSet {
 public:
  explicit EdgeSet(int p = 0) : p_(p) {}

  int p() const { return p_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  bool contains(int i, int j) const;
  const std::set<Edge>& edges() const { return edges_; }

  /// Adds the unordered pair; sign 0 means "unsigned".
  void add(int i, int j, int sign = 0);
  bool has_signs() const { return !signs_.empty(); }
  std::optional<int> sign(int i, int j) const;

 private:
  int p_;
  std::set<Edge> edges_;
  std::map<Edge, int> signs_;
};

/// Y = A X + W with W ~ N(0, sigma2 I_d).
class SensingSystem {
 public:
  SensingSystem(Matrix a, double sigma2);

  Eigen::Index d() const { return a_.rows(); }
  Eigen::Index p() const { return a_.cols(); }
  const Matrix& a() const { return a_; }
  double sigma2() const { return sigma2_; }

 private:
  Matrix a_;
  double sigma2_;
};

enum class SampleKind { LatentX, ObservedY, ReconstructedXhat };

std::string to_string(SampleKind kind);
SampleKind sample_kind_from_string(const std::string& s);

/// n vectors stored as the rows of an n x dim matrix.
class SampleBatch {
 public:
  SampleBatch(Matrix data, SampleKind kind, std::string provenance = {});

  Eigen::Index n() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }
  SampleKind kind() const { return kind_; }
  const Matrix& data() const { return data_; }
  const std::string& provenance() const { return provenance_; }

 private:
  Matrix data_;
  SampleKind kind_;
  std::string provenance_;
};

enum class Norm { InfElementwise, OffL1, OffFrobenius, OneOne, InfInf, Operator, Frobenius };

double matrix_norm(const Matrix& m, Norm which);

EdgeSet support_and_signs(const PrecisionMatrix& theta, double tol = kDefaultTol);

/// max_i ||Theta_i||_0, counting the diagonal entry.
int degree_max(const PrecisionMatrix& theta, double tol = kDefaultTol);

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

}  // namespace covgraph
