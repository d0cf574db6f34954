#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/polynomial.hpp"
#include "koopcert/sdp.hpp"

namespace koopcert {
namespace sos {

/// Affine scalar expression in the program's decision scalars.
class LinExpr {
 public:
  LinExpr() = default;
  /* implicit */ LinExpr(double c) : constant_(c) {}
  static LinExpr variable(int id) {
    LinExpr e;
    e.lin_[id] = 1.0;
    return e;
  }

  double constant() const { return constant_; }
  const std::map<int, double>& lin() const { return lin_; }
  bool has_vars() const { return !lin_.empty(); }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  LinExpr operator+(const LinExpr& o) const;
  LinExpr operator-(const LinExpr& o) const;
  LinExpr operator-() const;
  LinExpr operator*(double s) const;

  double eval(const Eigen::VectorXd& scalars) const;

 private:
  double constant_ = 0.0;
  std::map<int, double> lin_;
};

inline LinExpr operator*(double s, const LinExpr& e) { return e * s; }

/// Matrix of polynomials whose coefficients are affine in the decision
/// scalars. Every modeling operation keeps expressions affine; multiplying
/// two variable-dependent operands throws (that bilinearity is exactly what
/// the fixed-denominator hypothesis of the sampled-data design rules out).
class AffPolyMatrix {
 public:
  AffPolyMatrix() = default;
  AffPolyMatrix(int rows, int cols, int nvars);

  static AffPolyMatrix from_const(const PolyMatrix& M);
  static AffPolyMatrix from_const(const Eigen::MatrixXd& M, int nvars);
  static AffPolyMatrix identity(int n, int nvars);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nvars() const { return nvars_; }
  bool has_vars() const;

  /// coefficient of monomial mi in entry (i, j)
  LinExpr& coeff(int i, int j, const MultiIndex& mi);
  LinExpr coeff(int i, int j, const MultiIndex& mi) const;
  /// monomials with any nonzero (or variable) coefficient, graded-lex order
  std::vector<MultiIndex> monomials() const;

  AffPolyMatrix operator+(const AffPolyMatrix& o) const;
  AffPolyMatrix operator-(const AffPolyMatrix& o) const;
  AffPolyMatrix operator-() const;
  AffPolyMatrix operator*(const AffPolyMatrix& o) const;  ///< throws if bilinear
  AffPolyMatrix operator*(double s) const;
  AffPolyMatrix transpose() const;

  /// block write: this[r0.., c0..] += M
  void add_block(int r0, int c0, const AffPolyMatrix& M);
  AffPolyMatrix block(int r0, int c0, int rows, int cols) const;

  int degree() const;
  bool is_symmetric() const;

  /// substitute decision scalars, yielding a plain polynomial matrix
  PolyMatrix substitute(const Eigen::VectorXd& scalars) const;

 private:
  int rows_ = 0, cols_ = 0, nvars_ = 0;
  // monomial -> row-major grid of affine coefficients
  std::map<MultiIndex, std::vector<LinExpr>> terms_;
  std::vector<LinExpr>& grid(const MultiIndex& mi);
};

AffPolyMatrix operator*(const Eigen::MatrixXd& M, const AffPolyMatrix& P);
AffPolyMatrix operator*(const PolyMatrix& M, const AffPolyMatrix& P);
AffPolyMatrix operator*(const AffPolyMatrix& P, const Eigen::MatrixXd& M);
AffPolyMatrix operator*(const LinExpr& s, const PolyMatrix& M);

/// (M(z) (x) z) for affine M of size m x N over N variables; see
/// polynomial.hpp for the stacking convention.
AffPolyMatrix kron_with_vars(const AffPolyMatrix& M);

enum class VarKind { Scalar, Symmetric, PolyMatrix };

struct DeclaredVar {
  VarKind kind;
  std::string name;
  int offset;  ///< first scalar id
  int count;
  int rows = 1, cols = 1, nvars = 0, degree = 0;
};

struct SosConstraintInfo {
  int id;
  int dim;          ///< matrix side P
  int gram_degree;  ///< alpha
  int basis_size;   ///< |monomials(nvars, alpha)|
  int cone_index;   ///< position in the compiled cone list
  AffPolyMatrix expr;
};

struct PsdConstraintInfo {
  int dim;
  int cone_index;
  AffPolyMatrix expr;  ///< degree-0 affine matrix
};

/// Compiled program: the standard-form conic problem plus the layout needed
/// to map a solver point back onto declared variables and Gram blocks.
struct Compiled {
  sdp::ConicProblem problem;
  int num_scalars = 0;
  int num_ineq = 0;
  std::vector<SosConstraintInfo> sos;
  std::vector<PsdConstraintInfo> psd;
  std::vector<int> cone_offsets;  ///< variable offset of each cone block

  Eigen::VectorXd scalars(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd gram(const Eigen::VectorXd& v, int sos_index) const;
};

/// Per-constraint certificate audit, recomputed from scratch: the Gram's
/// minimum eigenvalue and the worst coefficient mismatch between the declared
/// expression and the quadratic form (I (x) m(z))' G (I (x) m(z)).
struct CertificateReport {
  struct Item {
    int constraint;
    double residual;
    double min_eig;
    double max_coeff;
    bool pass;
  };
  std::vector<Item> items;
  bool pass = true;
};

/// Declarative SOS-constrained program over affine polynomial matrices.
class SosProgram {
 public:
  LinExpr scalar(const std::string& name);
  /// symmetric matrix of decision scalars (upper triangle allocated)
  AffPolyMatrix symmetric(const std::string& name, int size, int nvars);
  AffPolyMatrix poly_matrix(const std::string& name, int rows, int cols, int nvars,
                            int degree);

  /// expr must be symmetric with total degree <= 2*alpha.
  int add_sos_matrix(const AffPolyMatrix& expr, int alpha);
  /// delegates to add_sos_matrix on expr - eps I
  int add_strict_sos(const AffPolyMatrix& expr, int alpha, double eps);
  /// constant (degree-0) affine matrix required PSD
  void add_psd(const AffPolyMatrix& expr);
  void add_eq(const LinExpr& e);    ///< e == 0
  void add_ineq(const LinExpr& e);  ///< e >= 0
  void maximize(const LinExpr& objective);
  void minimize(const LinExpr& objective);

  const std::vector<DeclaredVar>& variables() const { return vars_; }
  int num_scalars() const { return next_id_; }

  /// Gram parametrization + coefficient matching into a standard-form conic
  /// problem: variables [decision scalars (free) | PSD cones | ineq slacks].
  Compiled compile() const;

  std::string dump() const;  ///< human-readable constraint listing

  static CertificateReport verify_certificate(const Compiled& compiled,
                                              const Eigen::VectorXd& v);

  double value(const LinExpr& e, const Compiled& compiled,
               const Eigen::VectorXd& v) const;
  Eigen::MatrixXd value(const std::string& sym_name, const Compiled& compiled,
                        const Eigen::VectorXd& v) const;
  PolyMatrix value_poly(const std::string& poly_name, const Compiled& compiled,
                        const Eigen::VectorXd& v) const;

 private:
  int next_id_ = 0;
  std::vector<DeclaredVar> vars_;
  std::vector<SosConstraintInfo> sos_;
  std::vector<PsdConstraintInfo> psd_;
  std::vector<LinExpr> eqs_, ineqs_;
  LinExpr objective_;  ///< minimized
  const DeclaredVar& find(const std::string& name, VarKind kind) const;
};

}  // namespace sos
}  // namespace koopcert
