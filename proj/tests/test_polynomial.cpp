#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "koopcert/polynomial.hpp"

using namespace koopcert;

namespace {

Polynomial z(int nvars, int i) { return Polynomial::variable(nvars, i); }

Polynomial random_poly(int nvars, int deg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Polynomial p(nvars);
  for (const auto& mi : monomials_up_to_degree(nvars, deg))
    p.add_term(mi, coef(rng));
  return p;
}

// small-integer coefficients keep double arithmetic exact, so the ring
// axioms can be checked coefficient-exactly
Polynomial random_int_poly(int nvars, int deg, std::mt19937_64& rng) {
  Polynomial p(nvars);
  for (const auto& mi : monomials_up_to_degree(nvars, deg))
    p.add_term(mi, static_cast<double>(static_cast<int>(rng() % 7)) - 3.0);
  return p;
}

Eigen::VectorXd random_point(int nvars, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(nvars);
  for (int i = 0; i < nvars; ++i) x[i] = u(rng);
  return x;
}

}  // namespace

TEST_CASE("multi-index normalization and ordering") {
  CHECK(MultiIndex({1, 0, 0}) == MultiIndex({1}));
  CHECK(MultiIndex({2, 1}).degree() == 3);
  // graded-lex listing for two variables, degree <= 2
  const auto ms = monomials_up_to_degree(2, 2);
  REQUIRE(ms.size() == 6);  // binomial(4, 2)
  CHECK(ms[0] == MultiIndex());
  CHECK(ms[1] == MultiIndex({1, 0}));
  CHECK(ms[2] == MultiIndex({0, 1}));
  CHECK(ms[3] == MultiIndex({2, 0}));
  CHECK(ms[4] == MultiIndex({1, 1}));
  CHECK(ms[5] == MultiIndex({0, 2}));
  CHECK(monomials_up_to_degree(5, 0).size() == 1);
  const auto m1 = monomials_up_to_degree(1, 3);
  REQUIRE(m1.size() == 4);
  CHECK(m1[3] == MultiIndex({3}));
}

TEST_CASE("add") {
  const int n = 2;
  CHECK((z(n, 0) + (-z(n, 0))).is_zero());
  Polynomial p = z(n, 0) * z(n, 0) + Polynomial::constant(n, 1.0);
  Polynomial q = z(n, 0) * z(n, 0) * 2.0;
  Polynomial s = p + q;
  CHECK(s.coeff(MultiIndex({2})) == doctest::Approx(3.0));
  CHECK(s.coeff(MultiIndex()) == doctest::Approx(1.0));
  // multi-index normalization merges z1 z2 with z2 z1
  Polynomial a = z(n, 0) * z(n, 1);
  Polynomial b = z(n, 1) * z(n, 0);
  CHECK((a + b).coeff(MultiIndex({1, 1})) == doctest::Approx(2.0));
  CHECK_THROWS_AS(z(2, 0) + z(3, 0), std::invalid_argument);
}

TEST_CASE("mul") {
  const int n = 1;
  Polynomial p = (z(n, 0) + Polynomial::constant(n, 1.0)) *
                 (z(n, 0) - Polynomial::constant(n, 1.0));
  CHECK(p.coeff(MultiIndex({2})) == doctest::Approx(1.0));
  CHECK(p.coeff(MultiIndex()) == doctest::Approx(-1.0));
  CHECK(p.coeff(MultiIndex({1})) == 0.0);
  CHECK((p * Polynomial(n)).is_zero());
  Polynomial s = z(2, 0) + z(2, 1);
  Polynomial sq = s * s;
  CHECK(sq.coeff(MultiIndex({2, 0})) == doctest::Approx(1.0));
  CHECK(sq.coeff(MultiIndex({1, 1})) == doctest::Approx(2.0));
  CHECK(sq.coeff(MultiIndex({0, 2})) == doctest::Approx(1.0));
}

TEST_CASE("eval") {
  Polynomial p = z(2, 0) * z(2, 0) + z(2, 1) * 2.0;
  Eigen::VectorXd x(2);
  x << 3.0, 1.0;
  CHECK(p.eval(x) == doctest::Approx(11.0));
  CHECK(p.eval(Eigen::VectorXd::Zero(2)) == doctest::Approx(0.0));
  // Motzkin-form value at (1, 1)
  Polynomial m(2);
  m.add_term(MultiIndex({4, 2}), 1.0);
  m.add_term(MultiIndex({2, 4}), 1.0);
  m.add_term(MultiIndex({2, 2}), -3.0);
  m.add_term(MultiIndex(), 1.0);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
  CHECK(m.eval(ones) == doctest::Approx(0.0));
  CHECK_THROWS_AS(p.eval(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("gradient") {
  Polynomial p = z(2, 0) * z(2, 0) * z(2, 1);
  const auto g = p.gradient();
  REQUIRE(g.size() == 2);
  CHECK(g[0].coeff(MultiIndex({1, 1})) == doctest::Approx(2.0));
  CHECK(g[1].coeff(MultiIndex({2, 0})) == doctest::Approx(1.0));
  for (const auto& gc : Polynomial::constant(3, 4.2).gradient()) CHECK(gc.is_zero());
  // observable x2 - (1/5) x1^2 used throughout the experiments
  Polynomial obs = z(2, 1) - z(2, 0) * z(2, 0) * 0.2;
  const auto go = obs.gradient();
  CHECK(go[0].coeff(MultiIndex({1})) == doctest::Approx(-0.4));
  CHECK(go[1].coeff(MultiIndex()) == doctest::Approx(1.0));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 3);
    Polynomial p = random_poly(n, 4, rng);
    const auto g = p.gradient();
    const Eigen::VectorXd x = random_point(n, rng);
    const double h = 1e-5;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (p.eval(xp) - p.eval(xm)) / (2 * h);
      CHECK(std::abs(g[i].eval(x) - fd) < 1e-6);
    }
  }
}

TEST_CASE("ring axioms and eval consistency on random polynomials") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 3);
    {
      Polynomial p = random_int_poly(n, 3, rng);
      Polynomial q = random_int_poly(n, 3, rng);
      Polynomial r = random_int_poly(n, 2, rng);
      CHECK(((p * q) * r) == (p * (q * r)));
      CHECK((p * (q + r)) == (p * q + p * r));
    }
    Polynomial p = random_poly(n, 3, rng);
    Polynomial q = random_poly(n, 3, rng);
    const Eigen::VectorXd x = random_point(n, rng);
    const double lhs = (p * q).eval(x);
    const double rhs = p.eval(x) * q.eval(x);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("kron_with_vars") {
  // identity-row [1 0]: stacked z * row
  PolyMatrix M(1, 2, 2);
  M.at(0, 0) = Polynomial::constant(2, 1.0);
  const PolyMatrix K = kron_with_vars(M);
  REQUIRE(K.rows() == 2);
  REQUIRE(K.cols() == 2);
  Eigen::VectorXd zv(2);
  zv << 3.0, 5.0;
  const Eigen::MatrixXd Kv = K.eval(zv);
  CHECK(Kv(0, 0) == doctest::Approx(3.0));
  CHECK(Kv(1, 0) == doctest::Approx(5.0));
  CHECK(Kv(0, 1) == 0.0);
  CHECK(Kv(1, 1) == 0.0);

  // zero matrix maps to zero
  const PolyMatrix K0 = kron_with_vars(PolyMatrix(1, 2, 2));
  CHECK(K0.eval(zv).norm() == 0.0);

  // L(z) = [z1 z2] evaluated at (1, 2) gives [[1,2],[2,4]]
  PolyMatrix L(1, 2, 2);
  L.at(0, 0) = Polynomial::variable(2, 0);
  L.at(0, 1) = Polynomial::variable(2, 1);
  Eigen::VectorXd pt(2);
  pt << 1.0, 2.0;
  const Eigen::MatrixXd KL = kron_with_vars(L).eval(pt);
  CHECK(KL(0, 0) == doctest::Approx(1.0));
  CHECK(KL(0, 1) == doctest::Approx(2.0));
  CHECK(KL(1, 0) == doctest::Approx(2.0));
  CHECK(KL(1, 1) == doctest::Approx(4.0));

  // Btilde * (L kron z) realizes the u-major bilinear ordering: brute-force
  // Kronecker comparison at random points
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const int N = 3, m = 2;
    PolyMatrix Lr(m, N, N);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < N; ++j)
        for (const auto& mi : monomials_up_to_degree(N, 1)) Lr.at(i, j).add_term(mi, u(rng));
    Eigen::MatrixXd Bt(N, m * N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < m * N; ++j) Bt(i, j) = u(rng);
    const Eigen::VectorXd zp = random_point(N, rng);
    const Eigen::MatrixXd left = Bt * kron_with_vars(Lr).eval(zp);
    // reference: kron(L(z), z) with blocks (i, k) = L_ik * z
    const Eigen::MatrixXd Lz = Lr.eval(zp);
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(m * N, N);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < N; ++k) ref.block(i * N, k, N, 1) = Lz(i, k) * zp;
    CHECK((left - Bt * ref).norm() < 1e-12);
  }
}

TEST_CASE("text round trip and compress") {
  Polynomial p(3);
  p.add_term(MultiIndex({2, 0, 1}), 3.5);
  p.add_term(MultiIndex({0, 1, 0}), -1.25);
  p.add_term(MultiIndex(), 0.5);
  const Polynomial q = Polynomial::parse(p.to_string(), 3);
  CHECK(p == q);
  CHECK(Polynomial::parse("0", 2).is_zero());
  CHECK_THROWS(Polynomial::parse("z9", 2));
  CHECK_THROWS(Polynomial::parse("1 +", 2));

  Polynomial tiny = p + Polynomial::constant(3, 1e-15) * Polynomial::variable(3, 0);
  CHECK(tiny.terms().size() == 4);  // arithmetic keeps tiny terms
  CHECK(tiny.compress(1e-12).terms().size() == 3);
}

TEST_CASE("polynomial matrices") {
  PolyMatrix A = PolyMatrix::identity(2, 2);
  PolyMatrix B(2, 2, 2);
  B.at(0, 1) = Polynomial::variable(2, 0);
  B.at(1, 0) = Polynomial::variable(2, 0);
  CHECK((A * B).is_symmetric());
  CHECK(B.is_symmetric());
  B.at(1, 0) = Polynomial::variable(2, 1);
  CHECK_FALSE(B.is_symmetric());
  Eigen::VectorXd x(2);
  x << 2.0, -1.0;
  CHECK(((A + A) * 0.5).eval(x).isApprox(Eigen::MatrixXd::Identity(2, 2)));
  CHECK_THROWS_AS(PolyMatrix(2, 2, 2) + PolyMatrix(3, 2, 2), std::invalid_argument);
}
