#include "koopcert/synthesis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace koopcert {

using nlohmann::json;
using sos::AffPolyMatrix;
using sos::LinExpr;
using sos::SosProgram;

Eigen::VectorXd Controller::eval(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = dict.lift(x);
  const Eigen::MatrixXd Lz = L.eval(z);
  Eigen::VectorXd u = Lz * P.ldlt().solve(z);
  if (kind == ControllerKind::RationalSampled) {
    const double den = u_den.eval(z);
    if (!(den > 0.0))
      throw std::runtime_error("controller denominator not positive at state");
    u /= den;
  }
  return u;
}

StateFeedback Controller::as_feedback() const {
  // copy by value; the controller is small
  Controller self = *this;
  return [self](const Eigen::VectorXd& x) { return self.eval(x); };
}

double RoaCertificate::level(const ObservableDictionary& dict,
                             const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = dict.lift(x);
  return z.dot(P.ldlt().solve(z));
}

void PerformanceSpec::validate(int N, int m) const {
  const int p = static_cast<int>(Bw.cols());
  const int q = static_cast<int>(C.rows());
  if (C.cols() != N) throw std::invalid_argument("PerformanceSpec: C must be q x N");
  if (D.rows() != q || D.cols() != m)
    throw std::invalid_argument("PerformanceSpec: D must be q x m");
  if (Dtilde.rows() != q || Dtilde.cols() != m * N)
    throw std::invalid_argument("PerformanceSpec: Dtilde must be q x mN");
  if (Dw.rows() != q || Dw.cols() != p)
    throw std::invalid_argument("PerformanceSpec: Dw must be q x p");
  if (Qw.rows() != p || Qw.cols() != p || Rw.rows() != q || Rw.cols() != q ||
      Sw.rows() != p || Sw.cols() != q)
    throw std::invalid_argument("PerformanceSpec: supply-rate block shapes");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(Qw), er(Rw);
  if (eq.eigenvalues().maxCoeff() >= 0.0)
    throw std::invalid_argument("PerformanceSpec: Qw must be negative definite");
  if (er.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("PerformanceSpec: Rw must be positive definite");
}

PerformanceSpec PerformanceSpec::l2_gain(const Eigen::MatrixXd& Bw,
                                         const Eigen::MatrixXd& C, int m, int N,
                                         double gamma) {
  PerformanceSpec s;
  const int p = static_cast<int>(Bw.cols());
  const int q = static_cast<int>(C.rows());
  s.Bw = Bw;
  s.C = C;
  s.D = Eigen::MatrixXd::Zero(q, m);
  s.Dtilde = Eigen::MatrixXd::Zero(q, m * N);
  s.Dw = Eigen::MatrixXd::Zero(q, p);
  s.Qw = -gamma * gamma * Eigen::MatrixXd::Identity(p, p);
  s.Sw = Eigen::MatrixXd::Zero(p, q);
  s.Rw = Eigen::MatrixXd::Identity(q, q);
  return s;
}

namespace {

struct ProgramParts {
  SosProgram prog;
  AffPolyMatrix P, L;
  AffPolyMatrix tau;  // 1x1
  LinExpr rho;
};

// shared declarations: P (symmetric, bounded), L (m x N, degree 2a-1),
// tau in SOS_+[z, 2 beta], rho in [eps, cap]
ProgramParts declare_common(const SurrogateModel& model, const SynthesisOptions& opts,
                            bool with_rho_objective) {
  const int N = model.lifted_dim();
  const int m = model.input_dim();
  ProgramParts parts;
  SosProgram& prog = parts.prog;
  parts.P = prog.symmetric("P", N, N);
  parts.L = prog.poly_matrix("L", m, N, N, 2 * opts.alpha - 1);
  parts.tau = prog.poly_matrix("tau", 1, 1, N, 2 * opts.beta);
  parts.rho = prog.scalar("rho");

  prog.add_psd(parts.P - AffPolyMatrix::identity(N, N) * opts.eps_scalar);
  prog.add_psd(AffPolyMatrix::identity(N, N) * opts.p_upper - parts.P);
  prog.add_strict_sos(parts.tau, opts.beta, opts.eps_sos);
  prog.add_ineq(parts.rho - opts.eps_scalar);
  prog.add_ineq(LinExpr(opts.rho_cap) - parts.rho);
  if (with_rho_objective) prog.maximize(parts.rho);
  return parts;
}

AffPolyMatrix scaled_identity(const AffPolyMatrix& s, int dim, double factor) {
  // s is a 1x1 affine polynomial; returns (factor * s) I_dim
  AffPolyMatrix I = AffPolyMatrix::identity(dim, s.nvars());
  AffPolyMatrix out(dim, dim, s.nvars());
  for (const auto& mi : s.monomials()) {
    const LinExpr c = s.coeff(0, 0, mi) * factor;
    for (int i = 0; i < dim; ++i) out.coeff(i, i, mi) += c;
  }
  return out;
}

// Q(z) of the continuous-time design:
// [ -(AP + B0 L + Bt(L kron z)) - (...)' - rho I - tau I,  -P,      -L'
//   -P,                                  tau/(2 cx^2) I,   0
//   -L,                                  0,                tau/(2 cu^2) I ]
AffPolyMatrix build_ct_matrix(const SurrogateModel& model, const ProgramParts& parts,
                              const LinExpr& rho_expr) {
  const int N = model.lifted_dim();
  const int m = model.input_dim();
  const double cx = model.c_x, cu = model.c_u;
  const int dim = 2 * N + m;

  AffPolyMatrix S = model.A * parts.P + AffPolyMatrix::from_const(model.B0, N) * parts.L +
                    model.Btilde * sos::kron_with_vars(parts.L);
  AffPolyMatrix Q(dim, dim, N);
  Q.add_block(0, 0, -S - S.transpose());
  AffPolyMatrix rhoI(N, N, N);
  for (int i = 0; i < N; ++i) rhoI.coeff(i, i, MultiIndex()) = rho_expr;
  Q.add_block(0, 0, -rhoI);
  Q.add_block(0, 0, -scaled_identity(parts.tau, N, 1.0));
  Q.add_block(0, N, -parts.P);
  Q.add_block(N, 0, -parts.P);
  Q.add_block(0, 2 * N, -parts.L.transpose());
  Q.add_block(2 * N, 0, -parts.L);
  Q.add_block(N, N, scaled_identity(parts.tau, N, 1.0 / (2.0 * cx * cx)));
  Q.add_block(2 * N, 2 * N, scaled_identity(parts.tau, m, 1.0 / (2.0 * cu * cu)));
  return Q;
}

// Eq.-(21)-style sampled-data matrix with fixed denominator u_d:
// [ ud P - tau I, 0,               0,               ud A P + B0 Ln + Bt(Ln kron z)
//   *,            tau/(2cx^2) I,   0,               ud P
//   *,            *,               tau/(2cu^2) I,   Ln
//   *,            *,               *,               ud (P - rho I) ]
AffPolyMatrix build_dt_matrix(const SurrogateModel& model, const ProgramParts& parts,
                              const LinExpr& rho_expr, const Polynomial& u_den) {
  const int N = model.lifted_dim();
  const int m = model.input_dim();
  const double cx = model.c_x, cu = model.c_u;
  const int dim = 3 * N + m;
  const int o2 = N, o3 = 2 * N, o4 = 2 * N + m;

  PolyMatrix udI(N, N, N);
  for (int i = 0; i < N; ++i) udI.at(i, i) = u_den;

  AffPolyMatrix Q(dim, dim, N);
  Q.add_block(0, 0, udI * parts.P - scaled_identity(parts.tau, N, 1.0));
  const AffPolyMatrix top =
      udI * (model.A * parts.P) + AffPolyMatrix::from_const(model.B0, N) * parts.L +
      model.Btilde * sos::kron_with_vars(parts.L);
  Q.add_block(0, o4, top);
  Q.add_block(o4, 0, top.transpose());
  Q.add_block(o2, o2, scaled_identity(parts.tau, N, 1.0 / (2.0 * cx * cx)));
  const AffPolyMatrix udP = udI * parts.P;
  Q.add_block(o2, o4, udP);
  Q.add_block(o4, o2, udP.transpose());
  Q.add_block(o3, o3, scaled_identity(parts.tau, m, 1.0 / (2.0 * cu * cu)));
  Q.add_block(o3, o4, parts.L);
  Q.add_block(o4, o3, parts.L.transpose());
  AffPolyMatrix rhoI(N, N, N);
  for (int i = 0; i < N; ++i) rhoI.coeff(i, i, MultiIndex()) = rho_expr;
  Q.add_block(o4, o4, udI * parts.P - (LinExpr(1.0) * udI) * rhoI);
  return Q;
}

// B_w(z) = grad Phi([I_n 0] z)' B_w, a polynomial N x p matrix (Eq.-(20) form)
PolyMatrix lifted_disturbance_map(const ObservableDictionary& dict,
                                  const Eigen::MatrixXd& Bw) {
  const int n = dict.state_dim();
  const int N = dict.lifted_dim();
  const int p = static_cast<int>(Bw.cols());
  PolyMatrix out(N, p, N);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < n; ++i) {
      // d phi_k / d x_i with x_i replaced by z_i (variable embedding)
      const Polynomial dpoly = dict.components()[k].derivative(i).embed(N);
      for (int j = 0; j < p; ++j) {
        if (Bw(i, j) == 0.0) continue;
        out.at(k, j) += dpoly * Bw(i, j);
      }
    }
  }
  return out;
}

struct SolveSummary {
  bool feasible = false;
  Eigen::VectorXd v;
  sdp::SolveResult res;
  sos::Compiled compiled;
};

SolveSummary run_sdp(const SosProgram& prog, const sdp::SolveOptions& opts) {
  SolveSummary summary;
  summary.compiled = prog.compile();
  summary.res = sdp::solve(summary.compiled.problem, opts);
  summary.v = summary.res.v;
  summary.feasible = summary.res.status == sdp::SolveStatus::Optimal;
  return summary;
}

}  // namespace

RoaCertificate compute_roa(const ObservableDictionary& dict, const Eigen::MatrixXd& P,
                           const Box& box, int grid_density, int refine_steps) {
  const int n = dict.state_dim();
  if (box.dim() != n) throw std::invalid_argument("compute_roa: box dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("compute_roa: P must be positive definite");
  const Eigen::MatrixXd Pinv = P.inverse();
  auto V = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd z = dict.lift(x);
    return z.dot(Pinv * z);
  };

  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = Eigen::VectorXd::Zero(n);
  int best_face = -1, best_axis = -1;

  // dense scan of each face (fix one coordinate at a bound, grid the rest)
  std::vector<int> idx(n - 1);
  for (int fixed = 0; fixed < n; ++fixed) {
    for (int side = 0; side < 2; ++side) {
      const double xv = side ? box.hi[fixed] : box.lo[fixed];
      // iterate over the (n-1)-dim grid; desk scale keeps n small
      const int per_axis = n == 1 ? 1 : grid_density;
      std::vector<int> counter(std::max(n - 1, 1), 0);
      bool done = false;
      while (!done) {
        Eigen::VectorXd x(n);
        x[fixed] = xv;
        int c = 0;
        for (int a = 0; a < n; ++a) {
          if (a == fixed) continue;
          const double t =
              per_axis == 1 ? 0.5
                            : static_cast<double>(counter[c]) / (per_axis - 1);
          x[a] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
          ++c;
        }
        const double v = V(x);
        if (v < best) {
          best = v;
          best_x = x;
          best_face = 2 * fixed + side;
          best_axis = -1;
        }
        // advance counter
        done = true;
        for (int a = 0; a < n - 1; ++a) {
          if (++counter[a] < per_axis) {
            done = false;
            break;
          }
          counter[a] = 0;
        }
        if (n == 1) break;
      }
    }
  }
  (void)best_face;

  // golden-section refinement along each free axis of the best face
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int a = 0; a < n; ++a) {
    if (best_x[a] == box.lo[a] || best_x[a] == box.hi[a]) continue;  // fixed axis
    const double cell = (box.hi[a] - box.lo[a]) / std::max(grid_density - 1, 1);
    double lo = std::max(box.lo[a], best_x[a] - cell);
    double hi = std::min(box.hi[a], best_x[a] + cell);
    Eigen::VectorXd x = best_x;
    for (int it = 0; it < refine_steps; ++it) {
      const double m1 = hi - gr * (hi - lo);
      const double m2 = lo + gr * (hi - lo);
      x[a] = m1;
      const double v1 = V(x);
      x[a] = m2;
      const double v2 = V(x);
      if (v1 < v2) hi = m2; else lo = m1;
    }
    x[a] = 0.5 * (lo + hi);
    if (V(x) < best) {
      best = V(x);
      best_x = x;
      best_axis = a;
    }
  }
  (void)best_axis;

  // containment validation on an enclosing grid: any point outside the box
  // with V <= c* caps c*
  const double sigma_min_inv = 1.0 / eig.eigenvalues().maxCoeff();  // min eig of Pinv
  const double radius = std::sqrt(best / sigma_min_inv) * 1.05;
  double out_min = std::numeric_limits<double>::infinity();
  const int vd = 201;
  if (n <= 2) {
    Eigen::VectorXd x(n);
    std::vector<int> counter(n, 0);
    bool done = false;
    while (!done) {
      for (int a = 0; a < n; ++a) {
        const double t = static_cast<double>(counter[a]) / (vd - 1);
        x[a] = -radius + 2.0 * radius * t;
      }
      if (!box.contains(x)) out_min = std::min(out_min, V(x));
      done = true;
      for (int a = 0; a < n; ++a) {
        if (++counter[a] < vd) {
          done = false;
          break;
        }
        counter[a] = 0;
      }
    }
  }
  if (out_min < best) best = out_min * (1.0 - 1e-9);

  RoaCertificate cert;
  cert.P = P;
  cert.c_star = best;
  cert.minimizer = best_x;
  cert.grid_density = grid_density;
  return cert;
}

namespace {

// two-phase solve: maximize rho, then freeze 0.9 rho and maximize the
// strict-SOS margin t of (main constraint - t I) for a robust certificate
SynthesisResult solve_two_phase(
    const SurrogateModel& model, const Box& box, const SynthesisOptions& opts,
    const std::function<AffPolyMatrix(ProgramParts&, const LinExpr&)>& build_main,
    ControllerKind kind, const Polynomial& u_den) {
  const int N = model.lifted_dim();

  // phase 1: maximize rho
  double rho_hat = opts.eps_scalar;
  if (!opts.skip_objective_phase) {
    ProgramParts parts1 = declare_common(model, opts, /*with_rho_objective=*/true);
    const AffPolyMatrix Q = build_main(parts1, parts1.rho);
    parts1.prog.add_sos_matrix(Q, opts.alpha);
    sdp::SolveOptions phase1_opts = opts.sdp;
    phase1_opts.max_iters = opts.objective_max_iters;
    SolveSummary s1 = run_sdp(parts1.prog, phase1_opts);
    if (s1.res.status == sdp::SolveStatus::Optimal ||
        s1.res.status == sdp::SolveStatus::MaxIters) {
      const double cand = parts1.prog.value(parts1.rho, s1.compiled, s1.v);
      if (std::isfinite(cand) && cand > opts.eps_scalar) rho_hat = cand;
    }
  }

  // phase 2: freeze rho, maximize strict margin
  ProgramParts parts = declare_common(model, opts, /*with_rho_objective=*/false);
  const double rho_frozen = std::max(0.9 * rho_hat, opts.eps_scalar);
  const LinExpr margin = parts.prog.scalar("margin");
  {
    AffPolyMatrix Q = build_main(parts, LinExpr(rho_frozen));
    AffPolyMatrix tI(Q.rows(), Q.cols(), Q.nvars());
    for (int i = 0; i < Q.rows(); ++i) tI.coeff(i, i, MultiIndex()) = margin;
    parts.prog.add_sos_matrix(Q - tI, opts.alpha);
    parts.prog.add_ineq(margin);  // certificate only strengthens for t >= 0
    parts.prog.maximize(margin);
  }
  SolveSummary s2 = run_sdp(parts.prog, opts.sdp);

  SynthesisResult out;
  out.sdp_result = s2.res;
  out.compiled = s2.compiled;
  out.feasible = s2.feasible;
  if (!s2.feasible) {
    out.rho = rho_frozen;
    return out;
  }

  const Eigen::MatrixXd P = parts.prog.value("P", s2.compiled, s2.v);
  const PolyMatrix L = parts.prog.value_poly("L", s2.compiled, s2.v);
  const PolyMatrix tauM = parts.prog.value_poly("tau", s2.compiled, s2.v);
  const double t_margin = parts.prog.value(margin, s2.compiled, s2.v);

  // fold the margin into the Gram so the certificate covers the bare matrix:
  // Q = (I (x) m)' G (I (x) m) + t I  =>  add t on the constant-monomial diag
  Eigen::VectorXd v_cert = s2.v;
  {
    const auto& info = s2.compiled.sos.back();
    const int Mb = info.basis_size;
    const int base = s2.compiled.cone_offsets[info.cone_index];
    const int gdim = info.dim * Mb;
    for (int i = 0; i < info.dim; ++i) {
      const int a = i * Mb;  // constant monomial is first in graded-lex
      const int idx = a * gdim - a * (a - 1) / 2;  // diagonal svec position
      v_cert[base + idx] += std::max(t_margin, 0.0);
    }
    // margin scalar must be zeroed so the verified expression is the bare one
    for (const auto& vr : parts.prog.variables())
      if (vr.name == "margin") v_cert[vr.offset] = 0.0;
  }
  out.certificate = SosProgram::verify_certificate(s2.compiled, v_cert);
  out.constraint_matrix =
      s2.compiled.sos.back().expr.substitute(s2.compiled.scalars(v_cert));

  out.controller.kind = kind;
  out.controller.dict = model.dict;
  out.controller.L = L;
  out.controller.P = P;
  out.controller.u_den =
      kind == ControllerKind::RationalSampled ? u_den : Polynomial::constant(N, 1.0);
  out.controller.dt = model.dt;
  out.controller.provenance.c_x = model.c_x;
  out.controller.provenance.c_u = model.c_u;
  out.controller.provenance.alpha = opts.alpha;
  out.controller.provenance.beta = opts.beta;
  out.controller.provenance.rho = rho_frozen;
  out.controller.provenance.sos_margin = t_margin;
  out.controller.provenance.tau = tauM.at(0, 0);
  out.tau = tauM.at(0, 0);
  out.rho = rho_frozen;
  out.sos_margin = t_margin;
  out.roa = compute_roa(model.dict, P, box);
  return out;
}

}  // namespace

SynthesisResult synthesize_ct(const SurrogateModel& model, const Box& state_box,
                              const SynthesisOptions& opts) {
  if (model.domain != Domain::Continuous)
    throw std::invalid_argument("synthesize_ct: continuous-time surrogate required");
  if (!(model.c_x > 0.0 && model.c_u > 0.0))
    throw std::invalid_argument("synthesize_ct: error constants must be positive");
  if (opts.alpha < std::max(1, opts.beta))
    throw std::invalid_argument("synthesize_ct: alpha >= max(1, beta) required");
  return solve_two_phase(
      model, state_box, opts,
      [&](ProgramParts& parts, const LinExpr& rho) {
        return build_ct_matrix(model, parts, rho);
      },
      ControllerKind::PolynomialContinuous, Polynomial());
}

SynthesisResult synthesize_dt(const SurrogateModel& model, const Polynomial& u_den,
                              const Box& state_box, const SynthesisOptions& opts) {
  if (model.domain != Domain::Discrete)
    throw std::invalid_argument("synthesize_dt: discrete-time surrogate required");
  if (!(model.c_x > 0.0 && model.c_u > 0.0))
    throw std::invalid_argument("synthesize_dt: error constants must be positive");
  if (opts.alpha < opts.beta)
    throw std::invalid_argument("synthesize_dt: alpha >= beta required");
  const int N = model.lifted_dim();
  if (u_den.nvars() != N)
    throw std::invalid_argument("synthesize_dt: u_den must live in the lifted space");
  if (u_den.degree() > 2 * opts.alpha)
    throw std::invalid_argument("synthesize_dt: u_den degree exceeds 2 alpha");
  // fixed denominator must be strictly positive on the lifted box image
  {
    const int gd = 41;
    const int n = model.dict.state_dim();
    std::vector<int> counter(n, 0);
    bool done = false;
    while (!done) {
      Eigen::VectorXd x(n);
      for (int a = 0; a < n; ++a)
        x[a] = state_box.lo[a] +
               (state_box.hi[a] - state_box.lo[a]) * counter[a] / (gd - 1);
      if (!(u_den.eval(model.dict.lift(x)) > 0.0))
        throw std::invalid_argument(
            "synthesize_dt: denominator not strictly positive on the lifted box");
      done = true;
      for (int a = 0; a < n; ++a) {
        if (++counter[a] < gd) {
          done = false;
          break;
        }
        counter[a] = 0;
      }
    }
  }
  return solve_two_phase(
      model, state_box, opts,
      [&](ProgramParts& parts, const LinExpr& rho) {
        return build_dt_matrix(model, parts, rho, u_den);
      },
      ControllerKind::RationalSampled, u_den);
}

namespace {

AffPolyMatrix build_perf_matrix(const SurrogateModel& model, ProgramParts& parts,
                                const LinExpr& rho, const PerformanceSpec& spec,
                                const AffPolyMatrix& lambda, const LinExpr& eta,
                                const PolyMatrix& Bwz) {
  const int N = model.lifted_dim();
  const int m = model.input_dim();
  const int p = static_cast<int>(spec.Bw.cols());
  const int q = static_cast<int>(spec.C.rows());
  const int dim = 2 * N + m + p + q;
  const int o4 = 2 * N + m, o5 = 2 * N + m + p;

  AffPolyMatrix Q(dim, dim, N);
  Q.add_block(0, 0, build_ct_matrix(model, parts, rho));

  // (1,4): -lambda Bw(z) - (C P + D L + Dt (L kron z))' Sw'
  const AffPolyMatrix CK = spec.C * parts.P +
                           AffPolyMatrix::from_const(spec.D, N) * parts.L +
                           spec.Dtilde * sos::kron_with_vars(parts.L);
  AffPolyMatrix lamBw(N, p, N);
  for (const auto& ml : lambda.monomials())
    for (const auto& mi_bw : monomials_up_to_degree(N, Bwz.degree())) {
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < p; ++j) {
          const double cb = Bwz.at(i, j).coeff(mi_bw);
          if (cb == 0.0) continue;
          lamBw.coeff(i, j, ml * mi_bw) += lambda.coeff(0, 0, ml) * cb;
        }
    }
  const AffPolyMatrix blk14 =
      -lamBw - CK.transpose() * AffPolyMatrix::from_const(spec.Sw.transpose(), N);
  Q.add_block(0, o4, blk14);
  Q.add_block(o4, 0, blk14.transpose());

  // (1,5): -(C P + D L + Dt(L kron z))'
  Q.add_block(0, o5, -CK.transpose());
  Q.add_block(o5, 0, -CK);

  // (4,4): -lambda (Qw + Sw Dw + Dw' Sw') - eta I
  const Eigen::MatrixXd Hw = spec.Qw + spec.Sw * spec.Dw + spec.Dw.transpose() * spec.Sw.transpose();
  AffPolyMatrix blk44(p, p, N);
  for (const auto& ml : lambda.monomials()) {
    const LinExpr lc = lambda.coeff(0, 0, ml);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (Hw(i, j) != 0.0) blk44.coeff(i, j, ml) += lc * -Hw(i, j);
  }
  for (int i = 0; i < p; ++i) blk44.coeff(i, i, MultiIndex()) -= eta;
  Q.add_block(o4, o4, blk44);

  // (4,5): -lambda Dw'
  AffPolyMatrix blk45(p, q, N);
  for (const auto& ml : lambda.monomials()) {
    const LinExpr lc = lambda.coeff(0, 0, ml);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < q; ++j)
        if (spec.Dw(j, i) != 0.0) blk45.coeff(i, j, ml) += lc * -spec.Dw(j, i);
  }
  Q.add_block(o4, o5, blk45);
  Q.add_block(o5, o4, blk45.transpose());

  // (5,5): lambda Rw^{-1}
  const Eigen::MatrixXd Rwi = spec.Rw.inverse();
  AffPolyMatrix blk55(q, q, N);
  for (const auto& ml : lambda.monomials()) {
    const LinExpr lc = lambda.coeff(0, 0, ml);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j)
        if (Rwi(i, j) != 0.0) blk55.coeff(i, j, ml) += lc * Rwi(i, j);
  }
  Q.add_block(o5, o5, blk55);
  return Q;
}

}  // namespace

SynthesisResult synthesize_perf_at(const SurrogateModel& model,
                                   const PerformanceSpec& spec, double gamma,
                                   const Box& state_box,
                                   const SynthesisOptions& opts) {
  if (model.domain != Domain::Continuous)
    throw std::invalid_argument("synthesize_perf: continuous-time surrogate required");
  if (!(model.c_x > 0.0 && model.c_u > 0.0))
    throw std::invalid_argument("synthesize_perf: error constants must be positive");
  if (opts.alpha < std::max(1, opts.beta))
    throw std::invalid_argument("synthesize_perf: alpha >= max(1, beta) required");
  const int N = model.lifted_dim();
  const int m = model.input_dim();
  PerformanceSpec gspec = spec;
  if (gamma > 0.0)
    gspec.Qw = -gamma * gamma *
               Eigen::MatrixXd::Identity(spec.Bw.cols(), spec.Bw.cols());
  gspec.validate(N, m);
  const PolyMatrix Bwz = lifted_disturbance_map(model.dict, gspec.Bw);

  // lambda degree cap keeps lambda * Bw(z) within the SOS degree bound
  const int lam_deg =
      std::max(0, std::min(2 * opts.beta, 2 * opts.alpha - Bwz.degree()));

  // phase 1: maximize rho (performance variant)
  auto build = [&](ProgramParts& parts, const LinExpr& rho, AffPolyMatrix& lambda,
                   LinExpr& eta) {
    lambda = parts.prog.poly_matrix("lambda", 1, 1, N, lam_deg);
    parts.prog.add_strict_sos(lambda, (lam_deg + 1) / 2, opts.eps_sos);
    eta = parts.prog.scalar("eta");
    parts.prog.add_ineq(eta - opts.eps_scalar);
    return build_perf_matrix(model, parts, rho, gspec, lambda, eta, Bwz);
  };

  double rho_hat = opts.eps_scalar;
  if (!opts.skip_objective_phase) {
    ProgramParts parts1 = declare_common(model, opts, true);
    AffPolyMatrix lambda1;
    LinExpr eta1;
    parts1.prog.add_sos_matrix(build(parts1, parts1.rho, lambda1, eta1), opts.alpha);
    sdp::SolveOptions phase1_opts = opts.sdp;
    phase1_opts.max_iters = opts.objective_max_iters;
    SolveSummary s1 = run_sdp(parts1.prog, phase1_opts);
    if (s1.res.status == sdp::SolveStatus::Optimal ||
        s1.res.status == sdp::SolveStatus::MaxIters) {
      const double cand = parts1.prog.value(parts1.rho, s1.compiled, s1.v);
      if (std::isfinite(cand) && cand > opts.eps_scalar) rho_hat = cand;
    }
  }

  ProgramParts parts = declare_common(model, opts, false);
  const double rho_frozen = std::max(0.9 * rho_hat, opts.eps_scalar);
  const LinExpr margin = parts.prog.scalar("margin");
  AffPolyMatrix lambda;
  LinExpr eta;
  {
    AffPolyMatrix Q = build(parts, LinExpr(rho_frozen), lambda, eta);
    AffPolyMatrix tI(Q.rows(), Q.cols(), Q.nvars());
    for (int i = 0; i < Q.rows(); ++i) tI.coeff(i, i, MultiIndex()) = margin;
    parts.prog.add_sos_matrix(Q - tI, opts.alpha);
    parts.prog.add_ineq(margin);
    parts.prog.maximize(margin);
  }
  SolveSummary s2 = run_sdp(parts.prog, opts.sdp);

  SynthesisResult out;
  out.sdp_result = s2.res;
  out.compiled = s2.compiled;
  out.feasible = s2.feasible;
  out.rho = rho_frozen;
  if (!s2.feasible) return out;

  const Eigen::MatrixXd P = parts.prog.value("P", s2.compiled, s2.v);
  const PolyMatrix L = parts.prog.value_poly("L", s2.compiled, s2.v);
  const PolyMatrix tauM = parts.prog.value_poly("tau", s2.compiled, s2.v);
  const double t_margin = parts.prog.value(margin, s2.compiled, s2.v);

  Eigen::VectorXd v_cert = s2.v;
  {
    const auto& info = s2.compiled.sos.back();
    const int Mb = info.basis_size;
    const int base = s2.compiled.cone_offsets[info.cone_index];
    const int gdim = info.dim * Mb;
    for (int i = 0; i < info.dim; ++i) {
      const int a = i * Mb;
      const int idx = a * gdim - a * (a - 1) / 2;
      v_cert[base + idx] += std::max(t_margin, 0.0);
    }
    for (const auto& vr : parts.prog.variables())
      if (vr.name == "margin") v_cert[vr.offset] = 0.0;
  }
  out.certificate = SosProgram::verify_certificate(s2.compiled, v_cert);
  out.constraint_matrix =
      s2.compiled.sos.back().expr.substitute(s2.compiled.scalars(v_cert));
  out.lambda = parts.prog.value_poly("lambda", s2.compiled, s2.v).at(0, 0);
  out.eta = parts.prog.value(eta, s2.compiled, s2.v);

  out.controller.kind = ControllerKind::PolynomialContinuous;
  out.controller.dict = model.dict;
  out.controller.L = L;
  out.controller.P = P;
  out.controller.u_den = Polynomial::constant(N, 1.0);
  out.controller.provenance.c_x = model.c_x;
  out.controller.provenance.c_u = model.c_u;
  out.controller.provenance.alpha = opts.alpha;
  out.controller.provenance.beta = opts.beta;
  out.controller.provenance.rho = rho_frozen;
  out.controller.provenance.sos_margin = t_margin;
  out.controller.provenance.tau = tauM.at(0, 0);
  out.tau = tauM.at(0, 0);
  out.sos_margin = t_margin;
  out.roa = compute_roa(model.dict, P, state_box);
  return out;
}

PerformanceResult synthesize_perf(const SurrogateModel& model,
                                  const PerformanceSpec& spec, const Box& state_box,
                                  const SynthesisOptions& opts) {
  PerformanceResult out;
  double lo = 1e-3, hi = 1e4;
  // bisection on log gamma; each query is a feasibility SDP at fixed gamma
  SynthesisOptions qopts = opts;
  qopts.skip_objective_phase = true;
  qopts.sdp.tol_primal = std::max(opts.sdp.tol_primal, 1e-6);
  qopts.sdp.tol_dual = std::max(opts.sdp.tol_dual, 1e-6);
  qopts.sdp.max_iters = std::min(opts.sdp.max_iters, 60000);
  std::optional<SynthesisResult> best;
  double best_gamma = hi;

  // bracket: confirm feasibility at the top
  SynthesisResult top = synthesize_perf_at(model, spec, hi, state_box, qopts);
  out.bisection_gammas.push_back(hi);
  if (!top.feasible) {
    out.base = top;
    out.gamma = std::numeric_limits<double>::infinity();
    return out;
  }
  best = top;
  best_gamma = hi;

  for (int it = 0; it < 40 && hi / lo > 1.02; ++it) {
    const double mid = std::sqrt(lo * hi);
    out.bisection_gammas.push_back(mid);
    SynthesisResult r = synthesize_perf_at(model, spec, mid, state_box, qopts);
    if (r.feasible) {
      hi = mid;
      best = r;
      best_gamma = mid;
    } else {
      lo = mid;
    }
  }

  // final certificate-quality solve at the found gamma
  SynthesisResult fin = synthesize_perf_at(model, spec, best_gamma, state_box, opts);
  out.base = fin.feasible ? fin : *best;
  out.gamma = best_gamma;

  // lambda* = min of lambda(z) over the lifted box grid (exactly the constant
  // coefficient when lambda is constant), and nu = lambda* c* / gamma^2
  if (out.base.feasible) {
    out.eta = out.base.eta;
    const Polynomial& lam = out.base.lambda;
    if (lam.degree() == 0) {
      out.lambda_star = lam.coeff(MultiIndex());
    } else {
      const int n = model.dict.state_dim();
      const int gd = 101;
      double mn = std::numeric_limits<double>::infinity();
      std::vector<int> counter(n, 0);
      bool done = false;
      while (!done) {
        Eigen::VectorXd x(n);
        for (int a = 0; a < n; ++a)
          x[a] = state_box.lo[a] +
                 (state_box.hi[a] - state_box.lo[a]) * counter[a] / (gd - 1);
        mn = std::min(mn, lam.eval(model.dict.lift(x)));
        done = true;
        for (int a = 0; a < n; ++a) {
          if (++counter[a] < gd) {
            done = false;
            break;
          }
          counter[a] = 0;
        }
      }
      out.lambda_star = mn;
    }
    out.disturbance_budget =
        out.lambda_star * out.base.roa.c_star / (out.gamma * out.gamma);
  }
  return out;
}

VerificationReport verify_synthesis(const SynthesisResult& result,
                                    const SurrogateModel& model,
                                    const ControlAffineSystem& sys, const Box& box,
                                    int grid_density, int num_trajectories) {
  VerificationReport rep;
  if (!result.feasible) return rep;
  const Controller& ctrl = result.controller;
  const int n = sys.state_dim();
  const int N = model.lifted_dim();
  const Eigen::MatrixXd Pinv = ctrl.P.inverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigP(ctrl.P);
  const double sig_min_pinv = 1.0 / eigP.eigenvalues().maxCoeff();

  // (i) pointwise min eigenvalue of the assembled constraint matrix on a grid
  {
    double worst = std::numeric_limits<double>::infinity();
    std::vector<int> counter(n, 0);
    bool done = false;
    const PolyMatrix& Qs = result.constraint_matrix;
    while (!done) {
      Eigen::VectorXd x(n);
      for (int a = 0; a < n; ++a)
        x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * counter[a] / (grid_density - 1);
      const Eigen::VectorXd z = model.dict.lift(x);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Qs.eval(z));
      worst = std::min(worst, eig.eigenvalues().minCoeff());
      done = true;
      for (int a = 0; a < n; ++a) {
        if (++counter[a] < grid_density) {
          done = false;
          break;
        }
        counter[a] = 0;
      }
    }
    rep.worst_eig = worst;
    rep.pointwise_psd = worst >= -1e-6;
  }

  // (ii) Lyapunov decrease along true-plant closed-loop trajectories from the
  // Omega(c*) boundary
  {
    bool all_ok = true;
    double min_rate = std::numeric_limits<double>::infinity();
    const double c_star = result.roa.c_star;
    int checked = 0;
    for (int k = 0; k < num_trajectories; ++k) {
      // boundary point along a ray (2-D scan; higher n uses axis pairs)
      const double th = 2.0 * M_PI * k / num_trajectories;
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
      dir[0] = std::cos(th);
      if (n > 1) dir[1] = std::sin(th);
      double lo = 0.0, hi = 0.0;
      for (int a = 0; a < n; ++a)
        hi = std::max(hi, 3.0 * std::max(std::abs(box.lo[a]), std::abs(box.hi[a])));
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd x = mid * dir;
        const Eigen::VectorXd z = model.dict.lift(x);
        if (z.dot(Pinv * z) <= c_star) lo = mid; else hi = mid;
      }
      const Eigen::VectorXd x0 = 0.999 * lo * dir;
      if (x0.norm() < 1e-12) continue;
      ++checked;

      SimConfig cfg;
      cfg.dt = ctrl.kind == ControllerKind::RationalSampled ? ctrl.dt : 1e-2;
      cfg.step_h = cfg.dt / 10.0;
      cfg.horizon = 10.0;
      const FeedbackMode mode = ctrl.kind == ControllerKind::RationalSampled
                                    ? FeedbackMode::Sampled
                                    : FeedbackMode::Continuous;
      const Trajectory tr = simulate_feedback(sys, x0, ctrl.as_feedback(), mode, cfg);
      if (tr.diverged) {
        all_ok = false;
        continue;
      }
      // V decrease and exponential envelope fit on log V
      double vprev = std::numeric_limits<double>::infinity();
      std::vector<double> ts, logv;
      bool monotone = true;
      for (size_t i = 0; i < tr.states.size(); ++i) {
        const Eigen::VectorXd z = model.dict.lift(tr.states[i]);
        const double V = z.dot(Pinv * z);
        if (V > vprev * (1.0 + 1e-9) + 1e-12) monotone = false;
        vprev = V;
        if (V > 1e-300) {
          ts.push_back(tr.times[i]);
          logv.push_back(std::log(V));
        }
      }
      if (!monotone || ts.size() < 3) {
        all_ok = false;
        continue;
      }
      // least-squares slope of log V
      double st = 0, sv = 0, stt = 0, stv = 0;
      for (size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sv += logv[i];
        stt += ts[i] * ts[i];
        stv += ts[i] * logv[i];
      }
      const double nn = static_cast<double>(ts.size());
      const double slope = (nn * stv - st * sv) / (nn * stt - st * st);
      const double beta_hat = -slope;
      min_rate = std::min(min_rate, beta_hat);
      if (!(beta_hat > 0.0)) all_ok = false;
      // envelope: log V(t) <= log V(0) - (beta/2) t + slack
      for (size_t i = 0; i < ts.size(); ++i) {
        if (logv[i] > logv[0] - 0.5 * beta_hat * ts[i] + 1e-3) {
          all_ok = false;
          break;
        }
      }
    }
    rep.trajectories_checked = checked;
    rep.lyapunov_decrease = all_ok && checked > 0;
    rep.decay_rate = min_rate;
  }

  // (iii) worst-case residual replay on a grid
  {
    double worst_slack = std::numeric_limits<double>::infinity();
    bool ok = true;
    std::vector<int> counter(n, 0);
    bool done = false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigPinv(Pinv);
    const double sig_max_pinv = eigPinv.eigenvalues().maxCoeff();
    const Eigen::VectorXd top_dir =
        eigPinv.eigenvectors().col(Pinv.rows() - 1);
    while (!done) {
      Eigen::VectorXd x(n);
      for (int a = 0; a < n; ++a)
        x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * counter[a] / (grid_density - 1);
      const Eigen::VectorXd z = model.dict.lift(x);
      if (z.norm() > 1e-12) {
        const Eigen::VectorXd u = ctrl.eval(x);
        const double rmax = std::sqrt(2.0 * model.c_x * model.c_x * z.squaredNorm() +
                                      2.0 * model.c_u * model.c_u * u.squaredNorm());
        const double bound = -result.rho * sig_min_pinv * sig_min_pinv * z.squaredNorm();
        if (model.domain == Domain::Continuous) {
          const Eigen::VectorXd drift = model.predict(z, u);
          const double vdot_nom = 2.0 * z.dot(Pinv * drift);
          const double vdot_worst = vdot_nom + 2.0 * (Pinv * z).norm() * rmax;
          const double slack = bound + 1e-6 - vdot_worst;
          worst_slack = std::min(worst_slack, slack);
          if (vdot_worst > bound + 1e-6) ok = false;
        } else {
          const Eigen::VectorXd znext = model.predict(z, u);
          // extremal candidates for the successor perturbation
          double vnext_max = 0.0;
          std::vector<Eigen::VectorXd> dirs;
          const Eigen::VectorXd pz = Pinv * znext;
          if (pz.norm() > 1e-14) dirs.push_back(pz.normalized());
          dirs.push_back(top_dir);
          for (const auto& dref : dirs) {
            for (double sgn : {1.0, -1.0}) {
              const Eigen::VectorXd zp = znext + sgn * rmax * dref;
              vnext_max = std::max(vnext_max, zp.dot(Pinv * zp));
            }
          }
          const double V = z.dot(Pinv * z);
          const double slack = (V + bound + 1e-6) - vnext_max;
          worst_slack = std::min(worst_slack, slack);
          if (vnext_max > V + bound + 1e-6) ok = false;
        }
      }
      done = true;
      for (int a = 0; a < n; ++a) {
        if (++counter[a] < grid_density) {
          done = false;
          break;
        }
        counter[a] = 0;
      }
    }
    rep.worst_case_replay = ok;
    rep.replay_slack = worst_slack;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json poly_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [mi, c] : p.terms()) {
    json t;
    t["exps"] = mi.exponents();
    t["coef"] = c;
    terms.push_back(t);
  }
  return {{"nvars", p.nvars()}, {"terms", terms}};
}

Polynomial poly_from_json(const json& j) {
  Polynomial p(j.at("nvars").get<int>());
  for (const auto& t : j.at("terms"))
    p.add_term(MultiIndex(t.at("exps").get<std::vector<int>>()),
               t.at("coef").get<double>());
  return p;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) M(i, k) = j[i][k];
  return M;
}

}  // namespace

void Controller::save(const std::string& path) const {
  json j;
  j["kind"] = kind == ControllerKind::PolynomialContinuous ? "polynomial-continuous"
                                                           : "rational-sampled";
  j["state_dim"] = dict.state_dim();
  json comps = json::array();
  for (const auto& p : dict.components()) comps.push_back(poly_to_json(p));
  j["dictionary"] = comps;
  json L_entries = json::array();
  for (int i = 0; i < L.rows(); ++i)
    for (int jj = 0; jj < L.cols(); ++jj) L_entries.push_back(poly_to_json(L.at(i, jj)));
  j["L"] = {{"rows", L.rows()}, {"cols", L.cols()}, {"entries", L_entries}};
  j["P"] = matrix_to_json(P);
  j["u_den"] = poly_to_json(u_den);
  j["dt"] = dt;
  j["provenance"] = {{"c_x", provenance.c_x},
                     {"c_u", provenance.c_u},
                     {"alpha", provenance.alpha},
                     {"beta", provenance.beta},
                     {"rho", provenance.rho},
                     {"sos_margin", provenance.sos_margin},
                     {"tau", poly_to_json(provenance.tau)}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write controller to " + path);
  os << j.dump(2) << "\n";
}

Controller Controller::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open controller " + path);
  json j;
  is >> j;
  const int n = j.at("state_dim");
  std::vector<Polynomial> comps;
  for (const auto& c : j.at("dictionary")) comps.push_back(poly_from_json(c));
  Controller ctrl{ControllerKind::PolynomialContinuous,
                  ObservableDictionary(n, std::move(comps)),
                  PolyMatrix(),
                  Eigen::MatrixXd(),
                  Polynomial(),
                  0.0,
                  {}};
  ctrl.kind = j.at("kind") == "rational-sampled" ? ControllerKind::RationalSampled
                                                 : ControllerKind::PolynomialContinuous;
  const auto& jl = j.at("L");
  PolyMatrix L(jl.at("rows"), jl.at("cols"), ctrl.dict.lifted_dim());
  int k = 0;
  for (int i = 0; i < L.rows(); ++i)
    for (int jj = 0; jj < L.cols(); ++jj) L.at(i, jj) = poly_from_json(jl.at("entries")[k++]);
  ctrl.L = L;
  ctrl.P = matrix_from_json(j.at("P"));
  ctrl.u_den = poly_from_json(j.at("u_den"));
  ctrl.dt = j.at("dt");
  const auto& pr = j.at("provenance");
  ctrl.provenance.c_x = pr.at("c_x");
  ctrl.provenance.c_u = pr.at("c_u");
  ctrl.provenance.alpha = pr.at("alpha");
  ctrl.provenance.beta = pr.at("beta");
  ctrl.provenance.rho = pr.at("rho");
  ctrl.provenance.sos_margin = pr.at("sos_margin");
  ctrl.provenance.tau = poly_from_json(pr.at("tau"));
  return ctrl;
}

void RoaCertificate::save(const std::string& path) const {
  json j;
  j["P"] = matrix_to_json(P);
  j["c_star"] = c_star;
  j["minimizer"] =
      std::vector<double>(minimizer.data(), minimizer.data() + minimizer.size());
  j["grid_density"] = grid_density;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write RoA certificate to " + path);
  os << j.dump(2) << "\n";
}

void VerificationReport::save(const std::string& path) const {
  json j;
  j["pointwise_psd"] = pointwise_psd;
  j["worst_eig"] = worst_eig;
  j["lyapunov_decrease"] = lyapunov_decrease;
  j["decay_rate"] = decay_rate;
  j["trajectories_checked"] = trajectories_checked;
  j["worst_case_replay"] = worst_case_replay;
  j["replay_slack"] = replay_slack;
  j["pass"] = pass();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write verification report to " + path);
  os << j.dump(2) << "\n";
}

}  // namespace koopcert
