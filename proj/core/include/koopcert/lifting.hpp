#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "koopcert/dynamics.hpp"
#include "koopcert/polynomial.hpp"

namespace koopcert {

/// Reduced observable map Phi_hat: R^n -> R^N. The first n components are
/// fixed to the coordinate functions x_1..x_n and every component vanishes at
/// the origin, so ||x|| <= ||Phi_hat(x)|| holds by construction. The constant
/// observable is implicit and never stored.
class ObservableDictionary {
 public:
  ObservableDictionary() = default;  ///< empty placeholder (state_dim 0)
  ObservableDictionary(int state_dim, std::vector<Polynomial> components);

  int state_dim() const { return n_; }
  int lifted_dim() const { return N_; }
  const std::vector<Polynomial>& components() const { return comps_; }
  double lipschitz_estimate() const { return L_phi_; }
  void set_lipschitz_estimate(double L) { L_phi_ = L; }

  Eigen::VectorXd lift(const Eigen::VectorXd& x) const;
  /// Exact Jacobian of Phi_hat at x, size N x n.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  static ObservableDictionary identity(int n);
  /// The four-observable dictionary used throughout the experiments:
  /// [x1, x2, x2 - lambda/(lambda-2 rho) x1^2, x1 x2].
  static ObservableDictionary slow_manifold(double rho, double lambda);

 private:
  int n_ = 0, N_ = 0;
  std::vector<Polynomial> comps_;
  double L_phi_ = 0.0;
};

enum class Domain { Continuous, Discrete };

struct DataBlock {
  Eigen::VectorXd input_label;  ///< the constant input of this experiment
  Eigen::MatrixXd xs;           ///< n x d sample states
  Eigen::MatrixXd ys;           ///< n x d derivatives (ct) or successors (dt)
};

/// (m+1) blocks of d pairs each, one block per constant input in
/// {0, e_1, ..., e_m}, drawn i.i.d. uniform from the sampling box.
struct Dataset {
  Domain domain = Domain::Continuous;
  double dt = 0.0;  ///< sampling period (discrete only)
  Box box;
  std::uint64_t seed = 0;
  int d = 0;
  std::vector<DataBlock> blocks;
  int redraws = 0;  ///< samples redrawn after a diverging flow

  /// One CSV per block (x1..xn,y1..yn) plus a JSON manifest.
  void save(const std::string& dir, const std::string& stem = "dataset") const;
  static Dataset load(const std::string& dir, const std::string& stem = "dataset");
};

Dataset generate_data(const ControlAffineSystem& sys, const Box& box, int d,
                      Domain domain, double dt, std::uint64_t seed);

struct LiftedData {
  Eigen::MatrixXd X0;                ///< N x d, lifted states of the u=0 block
  std::vector<Eigen::MatrixXd> Xei;  ///< (N+1) x d with leading all-ones row
  std::vector<Eigen::MatrixXd> Yu;   ///< N x d lifted targets, one per block
};

LiftedData build_matrices(const ObservableDictionary& dict, const Dataset& data);

struct DictionaryReport {
  double L_phi = 0.0;        ///< grid estimate inflated by 1.05
  bool lower_bound_ok = false;
  double worst_ratio = 0.0;  ///< min over grid of ||Phi(x)||/||x||
};

/// Grid check of ||x|| <= ||Phi_hat(x)|| <= L ||x|| over the box; stores the
/// estimated L back into the dictionary.
DictionaryReport validate_dictionary(ObservableDictionary& dict, const Box& box,
                                     int grid_density = 201);

/// Deterministic per-sample uniform draw (splitmix64-based), independent of
/// evaluation order so parallel generation stays reproducible.
double uniform_sample(std::uint64_t seed, std::uint64_t block, std::uint64_t sample,
                      std::uint64_t dim, double lo, double hi);

}  // namespace koopcert
