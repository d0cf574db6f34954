#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace koopcert {
namespace sdp {

enum class ConeKind { Free, NonNeg, Psd };

struct ConeBlock {
  ConeKind kind;
  int size;  ///< entries for Free/NonNeg; matrix dimension for Psd

  /// Length of this block inside the variable vector (svec for Psd).
  int vec_size() const {
    return kind == ConeKind::Psd ? size * (size + 1) / 2 : size;
  }
};

/// Standard-form conic problem
///   minimize    c' v
///   subject to  A v = b,   v in K = free x nonneg x PSD x ...
/// PSD blocks are stored as the scaled lower triangle (column-major,
/// off-diagonals times sqrt(2)) so the block inner product equals the matrix
/// trace inner product.
struct ConicProblem {
  Eigen::VectorXd c;
  Eigen::VectorXd b;
  std::vector<Eigen::Triplet<double>> A;  ///< sparse triplets, rows x cols
  int rows = 0;
  int cols = 0;
  std::vector<ConeBlock> cones;

  void validate() const;
  Eigen::SparseMatrix<double> matrix() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIters };

std::string to_string(SolveStatus s);

struct SolveOptions {
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  double tol_gap = 1e-6;
  int max_iters = 200000;
  double sigma = 1.0;          ///< initial ADMM penalty
  double over_relax = 1.6;
  int ruiz_sweeps = 10;
  int check_interval = 25;
  double infeas_tol = 1e-6;    ///< Farkas-certificate residual threshold
  bool adaptive_sigma = true;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIters;
  Eigen::VectorXd v;       ///< primal point (cone-feasible iterate)
  Eigen::VectorXd y;       ///< equality multipliers
  double objective = 0.0;  ///< c' v
  double primal_res = 0.0; ///< ||A v - b||_inf / (1 + ||b||_inf), recomputed
  double dual_res = 0.0;   ///< ||c - A'y - z||_inf / (1 + ||c||_inf)
  double gap = 0.0;
  int iters = 0;
  std::string message;

  void save_json(const std::string& path) const;
};

/// Operator-splitting (ADMM) solver: the affine step solves a cached
/// quasi-definite KKT factorization, the cone step projects blockwise.
/// Deterministic for fixed inputs. Infeasibility and unboundedness are
/// declared from normalized divergence certificates (best effort).
SolveResult solve(const ConicProblem& prob, const SolveOptions& opts = {});

/// Eigenvalue clamp to the nearest PSD matrix (input symmetrized first).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& S);

/// Sparse SDPA (.dat-s) interchange. The conic problem maps onto the SDPA
/// dual (max tr(F0 Y), tr(Fi Y) = c_i): equality rows become constraint
/// matrices, cone blocks become SDPA blocks (nonneg as diagonal blocks, free
/// variables split into differences of two nonneg diagonal blocks). A comment
/// header records the original cone list so import/export round-trips
/// byte-identically.
void export_interchange(const ConicProblem& prob, const std::string& path);
ConicProblem import_interchange(const std::string& path);

/// svec helpers (column-major lower triangle, off-diagonals scaled).
int svec_size(int s);
Eigen::MatrixXd svec_to_matrix(const Eigen::VectorXd& x, int s);
Eigen::VectorXd matrix_to_svec(const Eigen::MatrixXd& M);

}  // namespace sdp
}  // namespace koopcert
