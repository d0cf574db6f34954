#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/polynomial.hpp"

namespace koopcert {

/// Axis-aligned box, used both as sampling region and as input range.
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  static Box centered(int dim, double halfwidth);
};

/// Control-affine plant  xdot = f(x) + sum_i g_i(x) u_i (+ Bw w)  with
/// polynomial drift and input fields and f(0) = 0.
class ControlAffineSystem {
 public:
  ControlAffineSystem(std::vector<Polynomial> drift,
                      std::vector<std::vector<Polynomial>> input_maps,
                      std::optional<Eigen::MatrixXd> disturbance_map = {});

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  const std::vector<Polynomial>& drift() const { return f_; }
  const std::vector<std::vector<Polynomial>>& input_maps() const { return g_; }
  const std::optional<Eigen::MatrixXd>& disturbance_map() const { return Bw_; }

  Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& w = Eigen::VectorXd()) const;

  /// The two-state benchmark plant with a slow parabolic manifold:
  ///   x1' = rho x1,  x2' = lambda (x2 - x1^2) + u.
  static ControlAffineSystem slow_manifold(double rho, double lambda);

 private:
  int n_, m_;
  std::vector<Polynomial> f_;
  std::vector<std::vector<Polynomial>> g_;
  std::optional<Eigen::MatrixXd> Bw_;
};

struct SimConfig {
  double step_h = 1e-3;   ///< integrator step
  double horizon = 1.0;   ///< final time
  double dt = 1e-2;       ///< sampling period (ZOH grid)

  void validate() const;  ///< 0 < h <= dt <= T, dt an integer multiple of h
  static SimConfig for_sampling(double dt, double horizon);  ///< h = dt/10
};

/// Time-stamped trajectory on the integrator grid. If the state norm exceeds
/// the divergence guard the run stops early with `diverged` set.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  bool diverged = false;
  double diverged_at = 0.0;

  const Eigen::VectorXd& back_state() const { return states.back(); }
  void write_csv(const std::string& path) const;  ///< header t,x1,..,u1,..
};

inline constexpr double kDivergenceGuard = 1e6;

using InputSignal = std::function<Eigen::VectorXd(double t)>;
using StateFeedback = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

/// Fixed-step RK4 under a time-indexed input, held constant within each
/// integrator step (evaluated at the step's left endpoint, so a ZOH schedule
/// aligned to dt is reproduced exactly when h divides dt).
Trajectory integrate(const ControlAffineSystem& sys, const Eigen::VectorXd& x0,
                     const InputSignal& u, const SimConfig& cfg,
                     const InputSignal& w = nullptr);

enum class FeedbackMode { Continuous, Sampled };

/// Closed-loop simulation. Continuous mode feeds u = mu(x) at every RK4 stage;
/// Sampled mode holds u = mu(x(k dt)) over each sampling interval.
Trajectory simulate_feedback(const ControlAffineSystem& sys,
                             const Eigen::VectorXd& x0, const StateFeedback& mu,
                             FeedbackMode mode, const SimConfig& cfg,
                             const InputSignal& w = nullptr);

}  // namespace koopcert
