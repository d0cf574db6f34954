#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "koopcert/sos.hpp"

using namespace koopcert;
using sos::AffPolyMatrix;
using sos::LinExpr;
using sos::SosProgram;

namespace {

AffPolyMatrix const_poly_1x1(const Polynomial& p) {
  PolyMatrix M(1, 1, p.nvars());
  M.at(0, 0) = p;
  return AffPolyMatrix::from_const(M);
}

}  // namespace

TEST_CASE("declared variable sizes") {
  SosProgram prog;
  prog.symmetric("S", 4, 1);
  CHECK(prog.num_scalars() == 10);  // s(s+1)/2
  SosProgram prog2;
  prog2.poly_matrix("L", 1, 4, 4, 1);
  CHECK(prog2.num_scalars() == 20);  // (N+1 monomials) * 4 entries
  SosProgram prog3;
  prog3.scalar("rho");
  CHECK(prog3.num_scalars() == 1);
}

TEST_CASE("z^2 + 1 admits the identity Gram") {
  SosProgram prog;
  Polynomial p = Polynomial::variable(1, 0) * Polynomial::variable(1, 0) +
                 Polynomial::constant(1, 1.0);
  prog.add_sos_matrix(const_poly_1x1(p), 1);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  const Eigen::MatrixXd G = compiled.gram(r.v, 0);
  // matching forces G(0,0) = 1, G(1,1) = 1, 2 G(0,1) = 0
  CHECK(G(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(G(1, 1) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(G(0, 1)) < 1e-5);
  const auto report = SosProgram::verify_certificate(compiled, r.v);
  CHECK(report.pass);
}

TEST_CASE("z1 z2 is not SOS") {
  SosProgram prog;
  Polynomial p = Polynomial::variable(2, 0) * Polynomial::variable(2, 1);
  prog.add_sos_matrix(const_poly_1x1(p), 1);
  const sos::Compiled compiled = prog.compile();
  CHECK(sdp::solve(compiled.problem).status == sdp::SolveStatus::Infeasible);
}

TEST_CASE("(z+1)^2 has the unique all-ones Gram") {
  SosProgram prog;
  Polynomial zp1 = Polynomial::variable(1, 0) + Polynomial::constant(1, 1.0);
  prog.add_sos_matrix(const_poly_1x1(zp1 * zp1), 1);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  const Eigen::MatrixXd G = compiled.gram(r.v, 0);
  Eigen::MatrixXd want(2, 2);
  want << 1, 1, 1, 1;
  CHECK((G - want).norm() < 1e-4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  CHECK(eig.eigenvalues().minCoeff() > -1e-8);
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("strict SOS") {
  // degree-0 scalar: tau - eps reduces to a scalar bound
  {
    SosProgram prog;
    const LinExpr tau = prog.scalar("tau");
    AffPolyMatrix T(1, 1, 1);
    T.coeff(0, 0, MultiIndex()) = tau;
    prog.add_strict_sos(T, 0, 1e-6);
    prog.minimize(tau);
    const sos::Compiled compiled = prog.compile();
    const sdp::SolveResult r = sdp::solve(compiled.problem);
    REQUIRE(r.status == sdp::SolveStatus::Optimal);
    CHECK(r.v[0] >= 1e-6 - 1e-9);
    CHECK(r.v[0] <= 1e-6 + 1e-7);
  }
  // [1] with eps = 2 is infeasible
  {
    SosProgram prog;
    prog.add_strict_sos(const_poly_1x1(Polynomial::constant(1, 1.0)), 0, 2.0);
    CHECK(sdp::solve(prog.compile().problem).status ==
          sdp::SolveStatus::Infeasible);
  }
  // 2z^2 + 3 - 1 is SOS
  {
    SosProgram prog;
    Polynomial p = Polynomial::variable(1, 0) * Polynomial::variable(1, 0) * 2.0 +
                   Polynomial::constant(1, 3.0);
    prog.add_strict_sos(const_poly_1x1(p), 1, 1.0);
    CHECK(sdp::solve(prog.compile().problem).status == sdp::SolveStatus::Optimal);
  }
  CHECK_THROWS_AS(SosProgram().add_strict_sos(
                      const_poly_1x1(Polynomial::constant(1, 1.0)), 0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("compile: optimum of z^2 + c SOS is c = 0") {
  SosProgram prog;
  const LinExpr c = prog.scalar("c");
  Polynomial z2 = Polynomial::variable(1, 0) * Polynomial::variable(1, 0);
  AffPolyMatrix expr = const_poly_1x1(z2);
  expr.coeff(0, 0, MultiIndex()) += c;
  prog.add_sos_matrix(expr, 1);
  prog.maximize(LinExpr() - c);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  CHECK(std::abs(r.v[0]) < 1e-5);
}

TEST_CASE("compile: empty program") {
  SosProgram prog;
  const sos::Compiled compiled = prog.compile();
  CHECK(compiled.problem.cols == 0);
  CHECK(sdp::solve(compiled.problem).status == sdp::SolveStatus::Optimal);
}

TEST_CASE("compile: synthesis-sized cone bookkeeping") {
  // the continuous-time design for N = 4, m = 1, alpha = beta = 1: one Gram
  // cone of size 9 * 5 = 45 plus the two P-side cones of size 4
  const int N = 4, m = 1;
  SosProgram prog;
  const AffPolyMatrix P = prog.symmetric("P", N, N);
  const AffPolyMatrix L = prog.poly_matrix("L", m, N, N, 1);
  AffPolyMatrix Q(2 * N + m, 2 * N + m, N);
  Q.add_block(0, 0, -P);
  Q.add_block(0, N, -P);
  Q.add_block(N, 0, -P);
  Q.add_block(0, 2 * N, -L.transpose());
  Q.add_block(2 * N, 0, -L);
  AffPolyMatrix I99 = AffPolyMatrix::identity(2 * N + m, N);
  prog.add_sos_matrix(Q + I99 * 50.0, 1);
  prog.add_psd(P);
  const sos::Compiled compiled = prog.compile();
  REQUIRE(compiled.problem.cones.size() == 3);
  CHECK(compiled.problem.cones[0].kind == sdp::ConeKind::Free);
  CHECK(compiled.problem.cones[1].kind == sdp::ConeKind::Psd);
  CHECK(compiled.problem.cones[1].size == 45);
  CHECK(compiled.problem.cones[2].size == 4);
}

TEST_CASE("degree overflow is rejected") {
  SosProgram prog;
  Polynomial z = Polynomial::variable(1, 0);
  CHECK_THROWS_AS(prog.add_sos_matrix(const_poly_1x1(z * z * z * z), 1),
                  std::invalid_argument);
}

TEST_CASE("bilinearity is rejected at model-build time") {
  SosProgram prog;
  const AffPolyMatrix P = prog.symmetric("P", 2, 2);
  const AffPolyMatrix ud = prog.poly_matrix("ud", 1, 1, 2, 2);
  AffPolyMatrix udI(2, 2, 2);
  for (int i = 0; i < 2; ++i)
    for (const auto& mi : monomials_up_to_degree(2, 2))
      udI.coeff(i, i, mi) = ud.coeff(0, 0, mi);
  CHECK_THROWS_AS(udI * P, std::invalid_argument);
}

TEST_CASE("verify_certificate flags a perturbed Gram") {
  SosProgram prog;
  Polynomial zp1 = Polynomial::variable(1, 0) + Polynomial::constant(1, 1.0);
  prog.add_sos_matrix(const_poly_1x1(zp1 * zp1), 1);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  REQUIRE(SosProgram::verify_certificate(compiled, r.v).pass);

  // shift the Gram diagonal down by 1e-3: min-eig check must fail
  Eigen::VectorXd bad = r.v;
  const auto& info = compiled.sos[0];
  const int base = compiled.cone_offsets[info.cone_index];
  const int gdim = info.dim * info.basis_size;
  int k = 0;
  for (int j = 0; j < gdim; ++j)
    for (int i = j; i < gdim; ++i, ++k)
      if (i == j) bad[base + k] -= 1e-3;
  const auto rep = SosProgram::verify_certificate(compiled, bad);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("PASS certificates imply pointwise PSD samples") {
  // a nontrivial SOS matrix: [[z^2+2, z], [z, 2]] = [[z,1],[1,1]]'[[z,1],[1,1]] + ...
  SosProgram prog;
  const int nv = 2;
  PolyMatrix M(2, 2, nv);
  M.at(0, 0) = Polynomial::variable(nv, 0) * Polynomial::variable(nv, 0) +
               Polynomial::constant(nv, 2.0);
  M.at(0, 1) = Polynomial::variable(nv, 0);
  M.at(1, 0) = Polynomial::variable(nv, 0);
  M.at(1, 1) = Polynomial::constant(nv, 2.0) +
               Polynomial::variable(nv, 1) * Polynomial::variable(nv, 1);
  prog.add_sos_matrix(AffPolyMatrix::from_const(M), 1);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  const auto rep = SosProgram::verify_certificate(compiled, r.v);
  REQUIRE(rep.pass);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 1000; ++s) {
    Eigen::VectorXd z(nv);
    z << u(rng), u(rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M.eval(z));
    CHECK(eig.eigenvalues().minCoeff() >= -1e-7);
  }
}

TEST_CASE("round trip of declared coefficients through compile") {
  // build a feasible program by hand, solve, and read the declared variables
  // back: the linear matching is exact to solver accuracy
  SosProgram prog;
  const AffPolyMatrix S = prog.symmetric("S", 2, 1);
  // S - [[1, 0], [0, 2]] == 0 via scalar equalities
  Eigen::MatrixXd target(2, 2);
  target << 1, 0, 0, 2;
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j)
      prog.add_eq(S.coeff(i, j, MultiIndex()) - target(i, j));
  prog.add_psd(S);
  const sos::Compiled compiled = prog.compile();
  const sdp::SolveResult r = sdp::solve(compiled.problem);
  REQUIRE(r.status == sdp::SolveStatus::Optimal);
  const Eigen::MatrixXd Sv = prog.value("S", compiled, r.v);
  CHECK((Sv - target).norm() < 1e-6);
}
