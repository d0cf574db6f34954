#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "koopcert/edmd.hpp"
#include "koopcert/sos.hpp"

namespace koopcert {

enum class ControllerKind { PolynomialContinuous, RationalSampled };

/// State feedback recovered from a synthesis solve. Polynomial kind:
/// mu(x) = L(z) P^{-1} z at z = Phi_hat(x). Rational kind divides by the
/// fixed strictly-SOS denominator u_d(z) and is applied under zero-order hold.
struct Controller {
  ControllerKind kind = ControllerKind::PolynomialContinuous;
  ObservableDictionary dict;
  PolyMatrix L;          ///< m x N numerator, degree <= 2 alpha - 1
  Eigen::MatrixXd P;     ///< N x N, positive definite
  Polynomial u_den;      ///< denominator (rational kind), 1 otherwise
  double dt = 0.0;       ///< sampling period (rational kind)

  struct Provenance {
    double c_x = 0, c_u = 0;
    int alpha = 1, beta = 1;
    double rho = 0, sos_margin = 0;
    Polynomial tau;
  } provenance;

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  StateFeedback as_feedback() const;

  void save(const std::string& path) const;
  static Controller load(const std::string& path);
};

/// Sublevel-set certificate Omega(c*) = {x : Phi(x)' P^{-1} Phi(x) <= c*}.
struct RoaCertificate {
  Eigen::MatrixXd P;
  double c_star = 0.0;
  Eigen::VectorXd minimizer;  ///< boundary point attaining c*
  int grid_density = 0;

  double level(const ObservableDictionary& dict, const Eigen::VectorXd& x) const;
  void save(const std::string& path) const;
};

/// Quadratic performance channel: xdot gains B_w w, the output is
/// y = C z + D u + Dtilde (u (x) z) + D_w w, and the supply rate is
/// [w; y]' [[Q_w, S_w], [S_w', R_w]] [w; y] with R_w > 0, Q_w < 0.
struct PerformanceSpec {
  Eigen::MatrixXd Bw, C, D, Dtilde, Dw;
  Eigen::MatrixXd Qw, Sw, Rw;

  void validate(int N, int m) const;
  static PerformanceSpec l2_gain(const Eigen::MatrixXd& Bw, const Eigen::MatrixXd& C,
                                 int m, int N, double gamma);
};

struct SynthesisOptions {
  int alpha = 1;
  int beta = 1;
  double eps_sos = 1e-6;     ///< strict-SOS shift
  double eps_scalar = 1e-6;  ///< rho, eta, P lower bounds
  double rho_cap = 10.0;     ///< keeps the tiny-uncertainty regime bounded
  double p_upper = 1.0;      ///< normalization P <= p_upper I
  sdp::SolveOptions sdp;
  int objective_max_iters = 60000;  ///< phase-1 (max rho) iteration budget
  bool skip_objective_phase = false;  ///< feasibility-only (bisection queries)
};

struct SynthesisResult {
  Controller controller;
  RoaCertificate roa;
  Polynomial tau;
  double rho = 0.0;
  double sos_margin = 0.0;  ///< certified strict-SOS slack of the main constraint
  sdp::SolveResult sdp_result;
  sos::CertificateReport certificate;
  bool feasible = false;
  /// the main constraint matrix at the solved variables (margin removed)
  PolyMatrix constraint_matrix;
  Polynomial lambda;  ///< performance multiplier (perf synthesis only)
  double eta = 0.0;
  /// certificate-phase conic problem, kept for interchange export
  sos::Compiled compiled;
};

/// Continuous-time stabilizing synthesis. Maximizes rho subject to P <= I,
/// then re-solves with rho frozen at 90% while maximizing the strict-SOS
/// margin, from which the reported certificate is drawn.
SynthesisResult synthesize_ct(const SurrogateModel& model, const Box& state_box,
                              const SynthesisOptions& opts = {});

/// Sampled-data synthesis with a fixed strictly-SOS denominator u_d.
SynthesisResult synthesize_dt(const SurrogateModel& model, const Polynomial& u_den,
                              const Box& state_box, const SynthesisOptions& opts = {});

struct PerformanceResult {
  SynthesisResult base;
  double gamma = 0.0;          ///< certified L2 gain (bisected)
  double lambda_star = 0.0;    ///< min over the grid of the lambda multiplier
  double eta = 0.0;
  double disturbance_budget = 0.0;  ///< nu = lambda* c* / gamma^2
  std::vector<double> bisection_gammas;
};

/// Performance synthesis for the L2-gain supply rate; gamma is minimized by
/// bisection on [1e-3, 1e4] (the lambda * gamma^2 product is bilinear, so
/// each query fixes gamma). The multiplier lambda's degree is capped at
/// min(2 beta, 2 alpha - deg B_w(z)) to respect the SOS degree bound.
PerformanceResult synthesize_perf(const SurrogateModel& model,
                                  const PerformanceSpec& spec, const Box& state_box,
                                  const SynthesisOptions& opts = {});

/// Feasibility of the performance program at one fixed gamma. Pass gamma <= 0
/// to keep the spec's own supply-rate blocks (general quadratic performance).
SynthesisResult synthesize_perf_at(const SurrogateModel& model,
                                   const PerformanceSpec& spec, double gamma,
                                   const Box& state_box,
                                   const SynthesisOptions& opts = {});

/// c* = min of Phi' P^{-1} Phi over the box boundary, by dense face sampling
/// plus golden-section refinement, then validated for containment on an
/// enclosing grid (c* is reduced if a stray sublevel component pokes out).
RoaCertificate compute_roa(const ObservableDictionary& dict, const Eigen::MatrixXd& P,
                           const Box& box, int grid_density = 2001,
                           int refine_steps = 60);

/// Independent post-hoc checks of a synthesis result:
///  (i)   pointwise min eigenvalue of the assembled constraint matrix on a grid,
///  (ii)  Lyapunov decrease along true-plant closed-loop trajectories,
///  (iii) worst-case residual replay against the certified decay rate.
struct VerificationReport {
  bool pointwise_psd = false;
  double worst_eig = 0.0;
  bool lyapunov_decrease = false;
  double decay_rate = 0.0;      ///< fitted exponential envelope rate
  int trajectories_checked = 0;
  bool worst_case_replay = false;
  double replay_slack = 0.0;
  bool pass() const { return pointwise_psd && lyapunov_decrease && worst_case_replay; }
  void save(const std::string& path) const;
};

VerificationReport verify_synthesis(const SynthesisResult& result,
                                    const SurrogateModel& model,
                                    const ControlAffineSystem& sys, const Box& box,
                                    int grid_density = 41, int num_trajectories = 20);

}  // namespace koopcert
