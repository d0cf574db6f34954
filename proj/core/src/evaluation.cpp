#include "koopcert/evaluation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "koopcert/lifting.hpp"

namespace koopcert {

namespace {

// linear interpolation of the zero crossing of f between two grid corners
Eigen::Vector2d lerp_zero(const Eigen::Vector2d& a, double fa,
                          const Eigen::Vector2d& b, double fb) {
  const double t = fa / (fa - fb);
  return a + t * (b - a);
}

}  // namespace

RoaMap roa_map(const Controller& ctrl, const RoaCertificate& cert,
               const ObservableDictionary& dict, const ControlAffineSystem& sys,
               const Box& box, int contour_density, int sim_grid, double horizon) {
  if (dict.state_dim() != 2)
    throw std::invalid_argument("roa_map: planar systems only");
  RoaMap out;
  const Eigen::MatrixXd Pinv = cert.P.inverse();
  auto level = [&](double x1, double x2) {
    Eigen::VectorXd x(2);
    x << x1, x2;
    const Eigen::VectorXd z = dict.lift(x);
    return z.dot(Pinv * z) - cert.c_star;
  };
  if (!(cert.c_star > 0.0)) {
    out.degenerate = true;
    return out;
  }

  // marching squares on the level set
  const int D = contour_density;
  std::vector<double> f(static_cast<size_t>(D) * D);
  auto gx = [&](int i) { return box.lo[0] + (box.hi[0] - box.lo[0]) * i / (D - 1); };
  auto gy = [&](int j) { return box.lo[1] + (box.hi[1] - box.lo[1]) * j / (D - 1); };
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) f[static_cast<size_t>(i) * D + j] = level(gx(i), gy(j));
  for (int i = 0; i + 1 < D; ++i) {
    for (int j = 0; j + 1 < D; ++j) {
      const Eigen::Vector2d c00(gx(i), gy(j)), c10(gx(i + 1), gy(j)),
          c01(gx(i), gy(j + 1)), c11(gx(i + 1), gy(j + 1));
      const double f00 = f[static_cast<size_t>(i) * D + j];
      const double f10 = f[static_cast<size_t>(i + 1) * D + j];
      const double f01 = f[static_cast<size_t>(i) * D + j + 1];
      const double f11 = f[static_cast<size_t>(i + 1) * D + j + 1];
      int mask = 0;
      if (f00 < 0) mask |= 1;
      if (f10 < 0) mask |= 2;
      if (f11 < 0) mask |= 4;
      if (f01 < 0) mask |= 8;
      if (mask == 0 || mask == 15) continue;
      std::vector<Eigen::Vector2d> pts;
      if ((mask & 1) != ((mask >> 1) & 1)) pts.push_back(lerp_zero(c00, f00, c10, f10));
      if (((mask >> 1) & 1) != ((mask >> 2) & 1))
        pts.push_back(lerp_zero(c10, f10, c11, f11));
      if (((mask >> 2) & 1) != ((mask >> 3) & 1))
        pts.push_back(lerp_zero(c11, f11, c01, f01));
      if (((mask >> 3) & 1) != (mask & 1)) pts.push_back(lerp_zero(c01, f01, c00, f00));
      for (size_t k = 0; k + 1 < pts.size(); k += 2)
        out.contour_segments.emplace_back(pts[k], pts[k + 1]);
    }
  }

  // convergence scan at interior grid initial conditions
  SimConfig cfg;
  cfg.dt = ctrl.kind == ControllerKind::RationalSampled ? ctrl.dt : 1e-2;
  cfg.step_h = cfg.dt / 10.0;
  cfg.horizon = horizon;
  const FeedbackMode mode = ctrl.kind == ControllerKind::RationalSampled
                                ? FeedbackMode::Sampled
                                : FeedbackMode::Continuous;
  for (int i = 0; i < sim_grid; ++i) {
    for (int j = 0; j < sim_grid; ++j) {
      RoaMap::GridPoint gp;
      Eigen::VectorXd x0(2);
      x0 << box.lo[0] + (box.hi[0] - box.lo[0]) * (i + 0.5) / sim_grid,
          box.lo[1] + (box.hi[1] - box.lo[1]) * (j + 0.5) / sim_grid;
      gp.x0 = x0;
      gp.inside = level(x0[0], x0[1]) <= 0.0;
      if (gp.inside) {
        const Trajectory tr = simulate_feedback(sys, x0, ctrl.as_feedback(), mode, cfg);
        gp.converged = !tr.diverged && tr.back_state().norm() < 1e-2;
      }
      out.grid.push_back(std::move(gp));
    }
  }
  return out;
}

void RoaMap::write_contour_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "x1,x2\n";
  os.precision(17);
  for (const auto& [a, b] : contour_segments)
    os << a.x() << "," << a.y() << "\n" << b.x() << "," << b.y() << "\n";
}

void RoaMap::write_grid_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "x1,x2,inside,converged\n";
  os.precision(17);
  for (const auto& gp : grid)
    os << gp.x0[0] << "," << gp.x0[1] << "," << (gp.inside ? 1 : 0) << ","
       << (gp.converged ? 1 : 0) << "\n";
}

std::vector<GammaCurvePoint> gamma_curve(const SurrogateModel& base_model,
                                         const PerformanceSpec& spec,
                                         const Box& state_box,
                                         const std::vector<double>& c_values,
                                         const SynthesisOptions& opts) {
  std::vector<GammaCurvePoint> out;
  for (const double c : c_values) {
    SurrogateModel model = base_model;
    model.c_x = c;
    model.c_u = c;
    GammaCurvePoint pt;
    pt.c = c;
    try {
      const PerformanceResult res = synthesize_perf(model, spec, state_box, opts);
      pt.feasible = std::isfinite(res.gamma) && res.base.feasible;
      pt.gamma = res.gamma;
    } catch (const std::exception&) {
      pt.feasible = false;
      pt.gamma = std::numeric_limits<double>::infinity();
    }
    out.push_back(pt);
  }
  return out;
}

void write_gamma_csv(const std::vector<GammaCurvePoint>& curve,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "c,gamma,status\n";
  os.precision(17);
  for (const auto& pt : curve)
    os << pt.c << "," << pt.gamma << "," << (pt.feasible ? "feasible" : "infeasible")
       << "\n";
}

GainEstimate empirical_l2_gain(const ControlAffineSystem& sys, const Controller& ctrl,
                               const PerformanceSpec& spec,
                               const DisturbanceFamily& family, double step_h) {
  const int p = static_cast<int>(spec.Bw.cols());
  const int N = ctrl.dict.lifted_dim();
  GainEstimate est;
  SimConfig cfg;
  cfg.step_h = step_h;
  cfg.dt = ctrl.kind == ControllerKind::RationalSampled ? ctrl.dt : step_h;
  cfg.horizon = family.horizon;
  const FeedbackMode mode = ctrl.kind == ControllerKind::RationalSampled
                                ? FeedbackMode::Sampled
                                : FeedbackMode::Continuous;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sys.state_dim());

  for (int iw = 0; iw < family.widths; ++iw) {
    for (int ia = 0; ia < family.amplitudes; ++ia) {
      for (int ifr = 0; ifr < family.frequencies; ++ifr) {
        const int idx = (iw * family.amplitudes + ia) * family.frequencies + ifr;
        const double width =
            family.horizon * 0.5 * (iw + 1) / family.widths;  // up to T/2
        const double amp = family.max_amplitude * (ia + 1) / family.amplitudes;
        const double freq = 2.0 * M_PI * ifr / family.horizon * 4.0;  // 0..8pi/T*4
        // seeded random direction and phase
        Eigen::VectorXd dir(p);
        for (int k = 0; k < p; ++k)
          dir[k] = uniform_sample(family.seed, 11, idx, k, -1.0, 1.0);
        if (dir.norm() < 1e-9) dir.setOnes();
        dir.normalize();
        const double phase = uniform_sample(family.seed, 12, idx, 0, 0.0, 2.0 * M_PI);

        auto w_sig = [&](double t) -> Eigen::VectorXd {
          if (t >= width) return Eigen::VectorXd::Zero(p);
          const double osc = freq == 0.0 ? 1.0 : std::sin(freq * t + phase);
          return amp * osc * dir;
        };
        const Trajectory tr =
            simulate_feedback(sys, x0, ctrl.as_feedback(), mode, cfg, w_sig);
        ++est.evaluated;
        if (tr.diverged) {
          ++est.diverged;
          est.gain = std::numeric_limits<double>::infinity();
          continue;
        }
        // trapezoidal L2 norms of w and y = C z + D u + Dt(u x z) + Dw w
        double wn2 = 0.0, yn2 = 0.0;
        for (size_t k = 0; k + 1 < tr.times.size(); ++k) {
          const double h = tr.times[k + 1] - tr.times[k];
          auto sq = [&](size_t i) {
            const Eigen::VectorXd w = w_sig(tr.times[i]);
            const Eigen::VectorXd z = ctrl.dict.lift(tr.states[i]);
            const Eigen::VectorXd u = tr.inputs[i];
            Eigen::VectorXd y = spec.C * z + spec.D * u + spec.Dw * w;
            for (int ii = 0; ii < u.size(); ++ii)
              y += u[ii] * (spec.Dtilde.middleCols(ii * N, N) * z);
            return std::make_pair(w.squaredNorm(), y.squaredNorm());
          };
          const auto [w0, y0] = sq(k);
          const auto [w1, y1] = sq(k + 1);
          wn2 += 0.5 * h * (w0 + w1);
          yn2 += 0.5 * h * (y0 + y1);
        }
        if (wn2 < 1e-12) continue;  // zero-energy guard
        const double gain = std::sqrt(yn2 / wn2);
        if (gain > est.gain) {
          est.gain = gain;
          est.worst_width = width;
          est.worst_amp = amp;
          est.worst_freq = freq;
        }
      }
    }
  }
  return est;
}

LyapunovTrace lyapunov_trace(const ControlAffineSystem& sys, const Controller& ctrl,
                             const ObservableDictionary& dict,
                             const Eigen::VectorXd& x0, double horizon,
                             double step_h) {
  LyapunovTrace out;
  SimConfig cfg;
  cfg.step_h = step_h;
  cfg.dt = ctrl.kind == ControllerKind::RationalSampled ? ctrl.dt : step_h;
  cfg.horizon = horizon;
  const FeedbackMode mode = ctrl.kind == ControllerKind::RationalSampled
                                ? FeedbackMode::Sampled
                                : FeedbackMode::Continuous;
  const Trajectory tr = simulate_feedback(sys, x0, ctrl.as_feedback(), mode, cfg);
  const Eigen::MatrixXd Pinv = ctrl.P.inverse();
  out.t = tr.times;
  out.V.resize(tr.times.size());
  for (size_t k = 0; k < tr.times.size(); ++k) {
    const Eigen::VectorXd z = dict.lift(tr.states[k]);
    out.V[k] = z.dot(Pinv * z);
  }
  out.dVdt.assign(tr.times.size(), 0.0);
  for (size_t k = 1; k + 1 < tr.times.size(); ++k)
    out.dVdt[k] = (out.V[k + 1] - out.V[k - 1]) / (tr.times[k + 1] - tr.times[k - 1]);
  return out;
}

void LyapunovTrace::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,V,dVdt\n";
  os.precision(17);
  for (size_t k = 0; k < t.size(); ++k)
    os << t[k] << "," << V[k] << "," << dVdt[k] << "\n";
}

}  // namespace koopcert
