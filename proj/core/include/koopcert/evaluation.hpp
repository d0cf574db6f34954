#pragma once

#include <string>
#include <vector>

#include "koopcert/synthesis.hpp"

namespace koopcert {

/// Marching-squares contour of the certified sublevel set boundary plus a
/// pass/fail convergence scan of the true closed loop at interior grid points.
struct RoaMap {
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> contour_segments;
  struct GridPoint {
    Eigen::VectorXd x0;
    bool inside = false;
    bool converged = false;
  };
  std::vector<GridPoint> grid;
  bool degenerate = false;  ///< empty contour (c* <= 0)

  void write_contour_csv(const std::string& path) const;  ///< x1,x2 polyline
  void write_grid_csv(const std::string& path) const;     ///< x1,x2,converged
};

RoaMap roa_map(const Controller& ctrl, const RoaCertificate& cert,
               const ObservableDictionary& dict, const ControlAffineSystem& sys,
               const Box& box, int contour_density = 201, int sim_grid = 20,
               double horizon = 10.0);

struct GammaCurvePoint {
  double c = 0.0;
  double gamma = 0.0;
  bool feasible = false;
};

/// Minimized L2-gain bound per error-constant level c (c_x = c_u = c).
std::vector<GammaCurvePoint> gamma_curve(const SurrogateModel& base_model,
                                         const PerformanceSpec& spec,
                                         const Box& state_box,
                                         const std::vector<double>& c_values,
                                         const SynthesisOptions& opts = {});

void write_gamma_csv(const std::vector<GammaCurvePoint>& curve,
                     const std::string& path);

/// Finite-energy disturbance family: pulse-windowed sinusoids over a grid of
/// widths x amplitudes x frequencies with seeded random directions/phases.
struct DisturbanceFamily {
  int widths = 32;
  int amplitudes = 8;
  int frequencies = 8;
  double horizon = 50.0;
  double max_amplitude = 1.0;
  std::uint64_t seed = 7;
  int size() const { return widths * amplitudes * frequencies; }
};

struct GainEstimate {
  double gain = 0.0;       ///< max ||y||_L2 / ||w||_L2 over the family
  int evaluated = 0;
  int diverged = 0;        ///< divergent runs (reported as infinite gain)
  double worst_width = 0, worst_amp = 0, worst_freq = 0;
};

/// Empirical lower bound of the closed-loop L2 gain from x(0) = 0 under the
/// disturbance family, trapezoidal quadrature on both signals.
GainEstimate empirical_l2_gain(const ControlAffineSystem& sys, const Controller& ctrl,
                               const PerformanceSpec& spec,
                               const DisturbanceFamily& family,
                               double step_h = 1e-2);

/// V(t) and a central-difference dV/dt along the closed loop from x0.
struct LyapunovTrace {
  std::vector<double> t, V, dVdt;
  void write_csv(const std::string& path) const;  ///< t,V,dVdt
};

LyapunovTrace lyapunov_trace(const ControlAffineSystem& sys, const Controller& ctrl,
                             const ObservableDictionary& dict,
                             const Eigen::VectorXd& x0, double horizon,
                             double step_h = 1e-3);

}  // namespace koopcert
