#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>

#include "koopcert/lifting.hpp"

namespace koopcert {

/// Bilinear lifted surrogate  sigma Phi = A z + B0 u + Btilde (u (x) z) + r,
/// where sigma is d/dt (continuous) or the dt-shift (discrete). Btilde stacks
/// the blocks B_i - A column-wise, so predict(0,0) = 0 by construction.
struct SurrogateModel {
  ObservableDictionary dict;
  Eigen::MatrixXd A;       ///< N x N
  Eigen::MatrixXd B0;      ///< N x m
  Eigen::MatrixXd Btilde;  ///< N x mN, block i = B_i - A
  Domain domain = Domain::Continuous;
  double dt = 0.0;

  double c_x = -1.0;  ///< proportional error constants; < 0 until fitted
  double c_u = -1.0;

  struct Meta {
    int d = 0;
    std::uint64_t seed = 0;
    double delta = 0.05;   ///< probabilistic tolerance, metadata only
    double margin = 0.0;   ///< safety factor used by the constants fit
    bool rank_deficient = false;
  } meta;

  int lifted_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B0.cols()); }
  bool has_error_constants() const { return c_x >= 0.0 && c_u >= 0.0; }

  /// A z + B0 u + Btilde (u (x) z); lifted rate (ct) or successor (dt).
  Eigen::VectorXd predict(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);
};

/// Structured least-squares regression of the surrogate matrices from the
/// (m+1)-block dataset: A from the autonomous block on Phi_hat columns,
/// [b_i B_i] from block i on [1; Phi_hat] columns. Minimum-norm solutions via
/// a rank-revealing SVD with threshold 1e-10 * sigma_max.
SurrogateModel fit(const Dataset& data, const ObservableDictionary& dict);

/// Exact surrogate residual at (x, u) against the true plant (oracle role):
/// continuous: grad Phi_hat(x)^T f_c(x,u) - predict; discrete: lift of the
/// dt-flow minus predict.
Eigen::VectorXd residual(const SurrogateModel& model, const ControlAffineSystem& sys,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& u);

struct ValidationSpec {
  int samples = 4096;
  Box input_box;                 ///< defaults to [-1,1]^m when empty
  std::uint64_t seed = 20240 + 1;
  double kappa = 1.0;            ///< fit ray c_u = kappa * c_x
  double margin = 1.2;
};

struct ErrorBoundFit {
  double c_x = 0.0;
  double c_u = 0.0;
  double margin = 1.2;
  int support = 0;           ///< validation sample count
  double max_ratio = 0.0;    ///< max ||r|| / (||Phi|| + kappa ||u||) pre-margin
  Eigen::VectorXd worst_x;
  Eigen::VectorXd worst_u;
};

/// Smallest constants on the ray c_u = kappa * c_x covering the residual at
/// all validation samples, inflated by the margin; stores them in the model.
ErrorBoundFit fit_error_constants(SurrogateModel& model, const ControlAffineSystem& sys,
                                  const Box& state_box, const ValidationSpec& spec = {});

}  // namespace koopcert
