#include "koopcert/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace koopcert {

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  return true;
}

Box Box::centered(int dim, double halfwidth) {
  Box b;
  b.lo = Eigen::VectorXd::Constant(dim, -halfwidth);
  b.hi = Eigen::VectorXd::Constant(dim, halfwidth);
  return b;
}

ControlAffineSystem::ControlAffineSystem(
    std::vector<Polynomial> drift, std::vector<std::vector<Polynomial>> input_maps,
    std::optional<Eigen::MatrixXd> disturbance_map)
    : n_(static_cast<int>(drift.size())),
      m_(static_cast<int>(input_maps.size())),
      f_(std::move(drift)),
      g_(std::move(input_maps)),
      Bw_(std::move(disturbance_map)) {
  if (n_ == 0) throw std::invalid_argument("system needs at least one state");
  for (const auto& p : f_)
    if (p.nvars() != n_) throw std::invalid_argument("drift nvars mismatch");
  for (const auto& gi : g_) {
    if (static_cast<int>(gi.size()) != n_)
      throw std::invalid_argument("input map dimension mismatch");
    for (const auto& p : gi)
      if (p.nvars() != n_) throw std::invalid_argument("input map nvars mismatch");
  }
  if (Bw_ && Bw_->rows() != n_)
    throw std::invalid_argument("disturbance map row count mismatch");
  // the origin must be a controlled equilibrium
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n_);
  for (const auto& p : f_)
    if (std::abs(p.eval(zero)) != 0.0)
      throw std::invalid_argument("drift does not vanish at the origin");
}

Eigen::VectorXd ControlAffineSystem::rhs(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& w) const {
  if (x.size() != n_) throw std::invalid_argument("rhs: state dimension mismatch");
  if (u.size() != m_) throw std::invalid_argument("rhs: input dimension mismatch");
  Eigen::VectorXd dx(n_);
  for (int i = 0; i < n_; ++i) dx[i] = f_[i].eval(x);
  for (int j = 0; j < m_; ++j) {
    if (u[j] == 0.0) continue;
    for (int i = 0; i < n_; ++i) dx[i] += g_[j][i].eval(x) * u[j];
  }
  if (w.size() > 0) {
    if (!Bw_) throw std::invalid_argument("rhs: disturbance given but no Bw");
    if (w.size() != Bw_->cols())
      throw std::invalid_argument("rhs: disturbance dimension mismatch");
    dx += (*Bw_) * w;
  }
  return dx;
}

ControlAffineSystem ControlAffineSystem::slow_manifold(double rho, double lambda) {
  const int n = 2;
  std::vector<Polynomial> f;
  f.push_back(Polynomial::variable(n, 0) * rho);
  Polynomial x1sq = Polynomial::variable(n, 0) * Polynomial::variable(n, 0);
  f.push_back((Polynomial::variable(n, 1) - x1sq) * lambda);
  std::vector<std::vector<Polynomial>> g(1);
  g[0].push_back(Polynomial(n));
  g[0].push_back(Polynomial::constant(n, 1.0));
  return ControlAffineSystem(std::move(f), std::move(g));
}

void SimConfig::validate() const {
  if (!(step_h > 0.0) || !(dt >= step_h) || !(horizon >= dt))
    throw std::invalid_argument("SimConfig: need 0 < h <= dt <= T");
  const double ratio = dt / step_h;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw std::invalid_argument("SimConfig: dt must be an integer multiple of h");
}

SimConfig SimConfig::for_sampling(double dt, double horizon) {
  SimConfig c;
  c.dt = dt;
  c.step_h = dt / 10.0;
  c.horizon = horizon;
  return c;
}

void Trajectory::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  const int n = states.empty() ? 0 : static_cast<int>(states[0].size());
  const int m = inputs.empty() ? 0 : static_cast<int>(inputs[0].size());
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  for (int i = 1; i <= m; ++i) os << ",u" << i;
  os << "\n";
  os.precision(17);
  for (size_t k = 0; k < times.size(); ++k) {
    os << times[k];
    for (int i = 0; i < n; ++i) os << "," << states[k][i];
    for (int i = 0; i < m; ++i) os << "," << inputs[k][i];
    os << "\n";
  }
}

namespace {

bool state_ok(const Eigen::VectorXd& x) {
  return x.allFinite() && x.norm() <= kDivergenceGuard;
}

// One RK4 step of xdot = field(x); the field captures whatever input policy
// the caller uses.
Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = field(x);
  const Eigen::VectorXd k2 = field(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = field(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = field(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Trajectory integrate(const ControlAffineSystem& sys, const Eigen::VectorXd& x0,
                     const InputSignal& u, const SimConfig& cfg,
                     const InputSignal& w) {
  cfg.validate();
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.step_h));
  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  tr.inputs.reserve(steps + 1);

  Eigen::VectorXd x = x0;
  const Eigen::VectorXd u0 = u ? u(0.0) : Eigen::VectorXd::Zero(sys.input_dim());
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  tr.inputs.push_back(u0);

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.step_h;
    const Eigen::VectorXd uk = u ? u(t) : Eigen::VectorXd::Zero(sys.input_dim());
    const Eigen::VectorXd wk = w ? w(t) : Eigen::VectorXd();
    auto field = [&](const Eigen::VectorXd& y) { return sys.rhs(y, uk, wk); };
    x = rk4_step(field, x, cfg.step_h);
    const double t1 = (k + 1) * cfg.step_h;
    if (!state_ok(x)) {
      tr.diverged = true;
      tr.diverged_at = t1;
      break;
    }
    tr.times.push_back(t1);
    tr.states.push_back(x);
    tr.inputs.push_back(u ? u(t1) : Eigen::VectorXd::Zero(sys.input_dim()));
  }
  return tr;
}

Trajectory simulate_feedback(const ControlAffineSystem& sys,
                             const Eigen::VectorXd& x0, const StateFeedback& mu,
                             FeedbackMode mode, const SimConfig& cfg,
                             const InputSignal& w) {
  cfg.validate();
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.step_h));
  const int hold = static_cast<int>(std::llround(cfg.dt / cfg.step_h));

  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  tr.inputs.reserve(steps + 1);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd u_hold = mu(x0);
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  tr.inputs.push_back(mode == FeedbackMode::Continuous ? mu(x0) : u_hold);

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.step_h;
    const Eigen::VectorXd wk = w ? w(t) : Eigen::VectorXd();
    if (mode == FeedbackMode::Sampled && k % hold == 0) u_hold = mu(x);
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> field;
    if (mode == FeedbackMode::Continuous) {
      field = [&](const Eigen::VectorXd& y) { return sys.rhs(y, mu(y), wk); };
    } else {
      field = [&](const Eigen::VectorXd& y) { return sys.rhs(y, u_hold, wk); };
    }
    x = rk4_step(field, x, cfg.step_h);
    const double t1 = (k + 1) * cfg.step_h;
    if (!state_ok(x)) {
      tr.diverged = true;
      tr.diverged_at = t1;
      break;
    }
    tr.times.push_back(t1);
    tr.states.push_back(x);
    tr.inputs.push_back(mode == FeedbackMode::Continuous ? mu(x) : u_hold);
  }
  return tr;
}

}  // namespace koopcert
