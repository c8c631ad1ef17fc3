#include <doctest.h>

#include <limits>

#include "covgraph/csv.hpp"
#include "covgraph/normal.hpp"
#include "covgraph/synth.hpp"
#include "test_util.hpp"

using namespace covgraph;
using covgraph::testing::random_matrix;

namespace {

// Largest singular value by power iteration on M^T M.
double power_iteration_norm(const Matrix& m) {
  Vector v = Vector::Ones(m.cols()).normalized();
  double prev = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Vector w = m.transpose() * (m * v);
    const double lam = w.norm();
    v = w / lam;
    if (std::abs(lam - prev) < 1e-15 * lam) break;
    prev = lam;
  }
  return (m * v).norm();
}

// Bisection on the erfc form of Phi, independent of the library's quantile.
double bisect_quantile(double u) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("matrix_norm examples") {
  CHECK(matrix_norm(Matrix::Identity(3, 3), Norm::OffL1) == 0.0);
  Matrix m(2, 2);
  m << 1, -2, 3, 4;
  CHECK(matrix_norm(m, Norm::OneOne) == 6.0);
  CHECK(matrix_norm(m, Norm::InfInf) == 7.0);
  CHECK(matrix_norm(m, Norm::InfElementwise) == 4.0);
  CHECK(matrix_norm(m, Norm::OffL1) == 5.0);
  CHECK(matrix_norm(m, Norm::OffFrobenius) == doctest::Approx(std::sqrt(13.0)));

  const Matrix r = random_matrix(5, 5, 7);
  CHECK(std::abs(matrix_norm(r, Norm::Operator) - power_iteration_norm(r)) < 1e-8);
}

TEST_CASE("matrix_norm rejects non-finite input") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(matrix_norm(m, Norm::Frobenius), Error);
}

TEST_CASE("matrix norm inequalities hold on random matrices") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int p = 2 + static_cast<int>(seed % 7);
    const Matrix m = random_matrix(p, p, seed + 100);
    CHECK(matrix_norm(m, Norm::OffL1) <= p * (p - 1) * matrix_norm(m, Norm::InfElementwise) + 1e-12);
    CHECK(matrix_norm(m, Norm::Frobenius) >= matrix_norm(m, Norm::Operator) - 1e-12);
    CHECK(matrix_norm(Matrix(m.transpose()), Norm::OneOne) == doctest::Approx(matrix_norm(m, Norm::InfInf)));
  }
}

TEST_CASE("support_and_signs and degree_max") {
  SUBCASE("diagonal matrix has no edges") {
    const PrecisionMatrix theta(Vector::Constant(4, 2.0).asDiagonal().toDenseMatrix());
    CHECK(support_and_signs(theta, 0.0).empty());
    CHECK(support_and_signs(theta, 1.0).empty());
    CHECK(degree_max(PrecisionMatrix(Matrix::Identity(4, 4))) == 1);
  }
  SUBCASE("band graph") {
    const PrecisionMatrix theta = synth::make_band_precision(4, 1.0, 0.4);
    const EdgeSet e = support_and_signs(theta, 1e-8);
    REQUIRE(e.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(e.contains(i, i + 1));
      CHECK(e.contains(i + 1, i));
      CHECK(e.sign(i, i + 1) == 1);
    }
    CHECK(degree_max(theta, 1e-8) == 3);
  }
  SUBCASE("threshold is strict") {
    const double tol = 1e-3;
    Matrix m = Matrix::Identity(2, 2);
    m(0, 1) = m(1, 0) = 0.5 * tol;
    CHECK(support_and_signs(PrecisionMatrix(m), tol).empty());
    m(0, 1) = m(1, 0) = -2 * tol;
    const EdgeSet e = support_and_signs(PrecisionMatrix(m), tol);
    CHECK(e.size() == 1);
    CHECK(e.sign(0, 1) == -1);
  }
  SUBCASE("dense matrix") {
    Matrix m(3, 3);
    m << 2, 0.1, 0.2, 0.1, 2, 0.3, 0.2, 0.3, 2;
    CHECK(degree_max(PrecisionMatrix(m)) == 3);
  }
}

TEST_CASE("support is invariant under positive rescaling; degree equals 1 + graph degree") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int p = 6;
    Matrix m = Matrix::Identity(p, p) * 3.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if (rng.uniform() < 0.4) m(i, j) = m(j, i) = rng.normal() * 0.3;
    const PrecisionMatrix theta(m);
    const EdgeSet e = support_and_signs(theta, 1e-8);
    const double c = 0.5 + 3.0 * rng.uniform();
    const EdgeSet scaled = support_and_signs(PrecisionMatrix(c * m), 1e-8);
    CHECK(scaled.edges() == e.edges());
    for (const auto& [i, j] : e.edges()) CHECK(scaled.sign(i, j) == e.sign(i, j));

    std::vector<int> deg(p, 0);
    for (const auto& [i, j] : e.edges()) ++deg[i], ++deg[j];
    CHECK(degree_max(theta, 1e-8) == 1 + *std::max_element(deg.begin(), deg.end()));
  }
}

TEST_CASE("EdgeSet contract") {
  EdgeSet e(3);
  CHECK_THROWS_AS(e.add(1, 1), Error);
  CHECK_THROWS_AS(e.add(0, 3), Error);
  e.add(2, 0, -1);
  CHECK(e.contains(0, 2));
  CHECK(e.edges().begin()->first == 0);
  CHECK(e.sign(2, 0) == -1);
  CHECK_FALSE(e.sign(0, 1).has_value());
}

TEST_CASE("matrix types validate their input") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.3;
  CHECK_THROWS_AS(CovarianceMatrix{asym}, Error);
  CHECK_THROWS_AS(PrecisionMatrix(Matrix::Zero(2, 3)), Error);
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = m(1, 0) = 2.0;
  CHECK_FALSE(PrecisionMatrix(m).is_positive_definite());
  CHECK(PrecisionMatrix(Matrix::Identity(2, 2)).is_positive_definite());
  CHECK_THROWS_AS(SensingSystem(Matrix::Identity(2, 2), -1.0), Error);
  CHECK_THROWS_AS(SampleBatch(Matrix(0, 2), SampleKind::LatentX), Error);
}

TEST_CASE("CSV round trip is exact") {
  const Matrix m = random_matrix(4, 3, 11) * 1e3;
  const Matrix back = csv::parse_matrix(csv::format_matrix(m));
  CHECK(back == m);
  const auto dir = covgraph::testing::scratch_dir("csv");
  csv::write_matrix(dir / "m.csv", m);
  CHECK(csv::read_matrix(dir / "m.csv") == m);
  CHECK_FALSE(std::filesystem::exists(dir / "m.csv.tmp"));
}

TEST_CASE("CSV parse errors carry their location") {
  try {
    csv::parse_matrix("1,2\n3,x\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(csv::parse_matrix("1,2\n3\n"), Error);
  CHECK_THROWS_AS(csv::parse_matrix(""), Error);
  const Matrix h = csv::parse_matrix("a,b\n1,2\n", {.skip_header = true});
  CHECK(h.rows() == 1);
  CHECK(h(0, 1) == 2.0);
}

TEST_CASE("Rng is deterministic and roughly standard") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs |= x != c.normal();
  }
  CHECK(differs);
  Rng r(5);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("normal quantile") {
  CHECK(std::abs(normal_quantile(0.5)) < 1e-15);
  CHECK(std::abs(normal_quantile(0.975) - 1.959964) < 1e-5);
  CHECK(std::abs(normal_quantile(0.975) - bisect_quantile(0.975)) < 1e-9);
  for (double u : {1e-6, 1e-4, 0.01, 0.1, 0.3, 0.7, 0.9, 0.99, 1 - 1e-4, 1 - 1e-6})
    CHECK(std::abs(normal_cdf(normal_quantile(u)) - u) < 1e-9);
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
  CHECK_THROWS_AS(normal_quantile(1.0), Error);
}
