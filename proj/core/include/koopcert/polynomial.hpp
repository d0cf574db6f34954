#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

namespace koopcert {

/// Exponent vector of a monomial. Trailing zeros are normalized away so that
/// the same monomial compares equal regardless of the declared variable count.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exponents);

  /// Monomial z_var^power.
  static MultiIndex unit(int var, int power = 1);

  int degree() const { return degree_; }
  /// Exponent of variable `var` (0 if beyond the stored prefix).
  int exponent(int var) const;
  const std::vector<int>& exponents() const { return exps_; }
  bool is_constant() const { return exps_.empty(); }

  /// Product of monomials = exponent-wise sum.
  MultiIndex operator*(const MultiIndex& o) const;

  bool operator==(const MultiIndex& o) const { return exps_ == o.exps_; }
  bool operator!=(const MultiIndex& o) const { return !(*this == o); }
  /// Graded lexicographic: lower degree first; within a degree the monomial
  /// with the lexicographically larger exponent tuple comes first, so that
  /// (2,0) < (1,1) < (0,2), i.e. z1^2, z1 z2, z2^2.
  bool operator<(const MultiIndex& o) const;

 private:
  std::vector<int> exps_;
  int degree_ = 0;
};

/// All monomials in `nvars` variables of total degree <= d, in graded-lex
/// order. Count is binomial(nvars + d, d).
std::vector<MultiIndex> monomials_up_to_degree(int nvars, int d);

/// Sparse multivariate polynomial with real coefficients over a fixed number
/// of variables. Stored zero coefficients are pruned exactly (threshold 0);
/// use compress() for tolerance-based display pruning.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int var);
  static Polynomial monomial(int nvars, const MultiIndex& mi, double coef);

  int nvars() const { return nvars_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  const std::map<MultiIndex, double>& terms() const { return terms_; }

  double coeff(const MultiIndex& mi) const;
  void add_term(const MultiIndex& mi, double coef);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator-() const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;

  double eval(const Eigen::VectorXd& point) const;
  Polynomial derivative(int var) const;
  std::vector<Polynomial> gradient() const;

  /// Same polynomial viewed over a larger variable set (new variables unused).
  Polynomial embed(int new_nvars) const;
  /// Copy with |coefficient| <= tol terms dropped. Display helper only.
  Polynomial compress(double tol) const;

  /// Term-list form, e.g. "3 * z1^2 z2 + -0.5 * z3". parse() reads it back.
  std::string to_string() const;
  static Polynomial parse(const std::string& text, int nvars);

  bool operator==(const Polynomial& o) const {
    return nvars_ == o.nvars_ && terms_ == o.terms_;
  }

 private:
  int nvars_ = 0;
  std::map<MultiIndex, double> terms_;
  void check_compatible(const Polynomial& o) const;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Dense matrix of polynomials sharing one variable set.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int nvars);

  static PolyMatrix identity(int n, int nvars);
  static PolyMatrix from_constant(const Eigen::MatrixXd& M, int nvars);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nvars() const { return nvars_; }
  Polynomial& at(int i, int j);
  const Polynomial& at(int i, int j) const;

  PolyMatrix operator+(const PolyMatrix& o) const;
  PolyMatrix operator-(const PolyMatrix& o) const;
  PolyMatrix operator*(const PolyMatrix& o) const;
  PolyMatrix operator*(const Polynomial& p) const;
  PolyMatrix operator*(double s) const;
  PolyMatrix transpose() const;

  Eigen::MatrixXd eval(const Eigen::VectorXd& z) const;
  int degree() const;
  bool is_symmetric() const;

 private:
  int rows_ = 0, cols_ = 0, nvars_ = 0;
  std::vector<Polynomial> e_;
};

PolyMatrix operator*(const Eigen::MatrixXd& M, const PolyMatrix& P);
PolyMatrix operator*(const PolyMatrix& P, const Eigen::MatrixXd& M);

/// For M of size m x N over N variables, returns the mN x N matrix M(z) (x) z
/// (Kronecker product with the variable vector), stacked input-major: rows
/// [i*N, (i+1)*N) hold z * (row i of M), so that Btilde * result realizes
/// Btilde (M(z) (x) z) with the u (x) z ordering of the bilinear model.
PolyMatrix kron_with_vars(const PolyMatrix& M);

}  // namespace koopcert
