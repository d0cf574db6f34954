#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "koopcert/sdp.hpp"

using namespace koopcert::sdp;

namespace {

// minimize x s.t. [[x, 1], [1, x]] >= 0   (optimum x* = 1)
ConicProblem analytic_problem() {
  ConicProblem p;
  p.cones = {{ConeKind::Free, 1}, {ConeKind::Psd, 2}};
  p.cols = 1 + 3;
  p.rows = 3;
  // svec block: [X11, sqrt2 X21, X22] at offsets 1..3
  p.A.emplace_back(0, 1, 1.0);
  p.A.emplace_back(0, 0, -1.0);  // X11 = x
  p.A.emplace_back(1, 2, 1.0);   // sqrt2 X21 = sqrt2
  p.A.emplace_back(2, 3, 1.0);
  p.A.emplace_back(2, 0, -1.0);  // X22 = x
  p.b = Eigen::Vector3d(0.0, std::sqrt(2.0), 0.0);
  p.c = Eigen::VectorXd::Zero(4);
  p.c[0] = 1.0;
  return p;
}

std::string run_external(const std::string& file) {
  const std::string cmd =
      std::string("python3 ") + KOOPCERT_TEST_SUPPORT_DIR + "/sdpa_check.py " + file;
  std::array<char, 256> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  pclose(pipe);
  return out;
}

}  // namespace

TEST_CASE("svec round trip") {
  Eigen::MatrixXd M(3, 3);
  M << 2, -1, 0.5, -1, 3, 0.25, 0.5, 0.25, 1;
  const Eigen::VectorXd x = matrix_to_svec(M);
  REQUIRE(x.size() == 6);
  CHECK((svec_to_matrix(x, 3) - M).norm() < 1e-14);
  // inner product preservation
  Eigen::MatrixXd N = Eigen::MatrixXd::Random(3, 3);
  N = (N + N.transpose()).eval();
  CHECK(matrix_to_svec(M).dot(matrix_to_svec(N)) ==
        doctest::Approx((M * N).trace()));
}

TEST_CASE("project_psd") {
  Eigen::MatrixXd D = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  const Eigen::MatrixXd P = project_psd(D);
  CHECK(P(0, 0) == doctest::Approx(1.0));
  CHECK(P(1, 1) == doctest::Approx(0.0));

  Eigen::MatrixXd S(2, 2);
  S << 4, 1, 1, 3;
  CHECK((project_psd(S) - S).norm() < 1e-12);  // idempotent on PSD input

  Eigen::MatrixXd F(2, 2);
  F << 0, 1, 1, 0;
  Eigen::MatrixXd want(2, 2);
  want << 0.5, 0.5, 0.5, 0.5;
  CHECK((project_psd(F) - want).norm() < 1e-12);
}

TEST_CASE("solve the analytic optimum x* = 1") {
  const ConicProblem p = analytic_problem();
  const SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(std::abs(r.v[0] - 1.0) < 1e-5);
  CHECK(r.primal_res <= 1e-7);
  CHECK(r.dual_res <= 1e-7);
}

TEST_CASE("infeasible diagonal block") {
  // PSD(1) variable forced to -1
  ConicProblem p;
  p.cones = {{ConeKind::Psd, 1}};
  p.cols = 1;
  p.rows = 1;
  p.A.emplace_back(0, 0, 1.0);
  p.b = Eigen::VectorXd::Constant(1, -1.0);
  p.c = Eigen::VectorXd::Zero(1);
  const SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("trivial nonneg optimum") {
  // min 1'x s.t. x1 - x2 = 0, x >= 0  -> optimum 0
  ConicProblem p;
  p.cones = {{ConeKind::NonNeg, 2}};
  p.cols = 2;
  p.rows = 1;
  p.A.emplace_back(0, 0, 1.0);
  p.A.emplace_back(0, 1, -1.0);
  p.b = Eigen::VectorXd::Zero(1);
  p.c = Eigen::VectorXd::Ones(2);
  const SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(std::abs(r.objective) < 1e-6);
}

TEST_CASE("empty problem") {
  ConicProblem p;
  p.c = Eigen::VectorXd();
  p.b = Eigen::VectorXd();
  const SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::Optimal);
}

TEST_CASE("unbounded direction") {
  // min -x over a single free variable with no constraints ties to a PSD
  // block only through nothing: use min -x, x in nonneg, no equalities
  ConicProblem p;
  p.cones = {{ConeKind::NonNeg, 1}};
  p.cols = 1;
  p.rows = 0;
  p.b = Eigen::VectorXd();
  p.c = Eigen::VectorXd::Constant(1, -1.0);
  const SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::Unbounded);
}

TEST_CASE("scaling invariance of status") {
  for (double s : {1.0, 10.0}) {
    ConicProblem p = analytic_problem();
    for (auto& t : p.A) t = {t.row(), t.col(), t.value() * s};
    p.b *= s;
    p.c *= s;
    const SolveResult r = solve(p);
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(std::abs(r.v[0] - 1.0) < 1e-5);
  }
  for (double s : {1.0, 10.0}) {
    ConicProblem p;
    p.cones = {{ConeKind::Psd, 1}};
    p.cols = 1;
    p.rows = 1;
    p.A.emplace_back(0, 0, s);
    p.b = Eigen::VectorXd::Constant(1, -s);
    p.c = Eigen::VectorXd::Zero(1);
    CHECK(solve(p).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("interchange round trip is byte-identical") {
  const ConicProblem p = analytic_problem();
  const std::string f1 = "/tmp/koopcert_sdpa_a.dat-s";
  const std::string f2 = "/tmp/koopcert_sdpa_b.dat-s";
  export_interchange(p, f1);
  const ConicProblem q = import_interchange(f1);
  export_interchange(q, f2);
  std::ifstream a(f1), b(f2);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().size() > 0);

  // imported problem solves to the same optimum
  const SolveResult r = solve(q);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(std::abs(r.v[0] - 1.0) < 1e-5);
}

TEST_CASE("empty problem exports a header-only file") {
  ConicProblem p;
  export_interchange(p, "/tmp/koopcert_sdpa_empty.dat-s");
  std::ifstream is("/tmp/koopcert_sdpa_empty.dat-s");
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines >= 3);  // cone comment + counts, no entries
}

TEST_CASE("external solver agrees on the analytic problem") {
  const ConicProblem p = analytic_problem();
  const std::string file = "/tmp/koopcert_sdpa_external.dat-s";
  export_interchange(p, file);
  const std::string out = run_external(file);
  INFO("external said: " << out);
  std::istringstream is(out);
  std::string status;
  double obj = 0;
  is >> status >> obj;
  REQUIRE(status.substr(0, 7) == "optimal");
  CHECK(std::abs(obj - 1.0) < 1e-6);
}

TEST_CASE("parse errors carry line information") {
  const std::string path = "/tmp/koopcert_sdpa_bad.dat-s";
  std::ofstream os(path);
  os << "\"koopcert cones: q4\n1\n1\n2\n1.0\n";
  os.close();
  bool threw = false;
  try {
    import_interchange(path);
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("unknown cone tag") != std::string::npos);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  CHECK(threw);
}
