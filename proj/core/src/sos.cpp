#include "koopcert/sos.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace koopcert {
namespace sos {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  constant_ += o.constant_;
  for (const auto& [id, c] : o.lin_) {
    auto it = lin_.find(id);
    if (it == lin_.end()) {
      if (c != 0.0) lin_[id] = c;
    } else {
      it->second += c;
      if (it->second == 0.0) lin_.erase(it);
    }
  }
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) { return *this += -o; }

LinExpr& LinExpr::operator*=(double s) {
  if (s == 0.0) {
    constant_ = 0.0;
    lin_.clear();
    return *this;
  }
  constant_ *= s;
  for (auto& [id, c] : lin_) c *= s;
  return *this;
}

LinExpr LinExpr::operator+(const LinExpr& o) const {
  LinExpr r = *this;
  r += o;
  return r;
}

LinExpr LinExpr::operator-(const LinExpr& o) const {
  LinExpr r = *this;
  r -= o;
  return r;
}

LinExpr LinExpr::operator-() const {
  LinExpr r = *this;
  r *= -1.0;
  return r;
}

LinExpr LinExpr::operator*(double s) const {
  LinExpr r = *this;
  r *= s;
  return r;
}

double LinExpr::eval(const Eigen::VectorXd& scalars) const {
  double v = constant_;
  for (const auto& [id, c] : lin_) {
    if (id >= scalars.size()) throw std::out_of_range("LinExpr::eval: bad var id");
    v += c * scalars[id];
  }
  return v;
}

AffPolyMatrix::AffPolyMatrix(int rows, int cols, int nvars)
    : rows_(rows), cols_(cols), nvars_(nvars) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("AffPolyMatrix: bad shape");
}

std::vector<LinExpr>& AffPolyMatrix::grid(const MultiIndex& mi) {
  auto it = terms_.find(mi);
  if (it == terms_.end())
    it = terms_.emplace(mi, std::vector<LinExpr>(static_cast<size_t>(rows_) * cols_))
             .first;
  return it->second;
}

AffPolyMatrix AffPolyMatrix::from_const(const PolyMatrix& M) {
  AffPolyMatrix R(M.rows(), M.cols(), M.nvars());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      for (const auto& [mi, c] : M.at(i, j).terms()) R.coeff(i, j, mi) += c;
  return R;
}

AffPolyMatrix AffPolyMatrix::from_const(const Eigen::MatrixXd& M, int nvars) {
  return from_const(PolyMatrix::from_constant(M, nvars));
}

AffPolyMatrix AffPolyMatrix::identity(int n, int nvars) {
  return from_const(PolyMatrix::identity(n, nvars));
}

bool AffPolyMatrix::has_vars() const {
  for (const auto& [mi, g] : terms_)
    for (const auto& e : g)
      if (e.has_vars()) return true;
  return false;
}

LinExpr& AffPolyMatrix::coeff(int i, int j, const MultiIndex& mi) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
    throw std::out_of_range("AffPolyMatrix::coeff");
  return grid(mi)[static_cast<size_t>(i) * cols_ + j];
}

LinExpr AffPolyMatrix::coeff(int i, int j, const MultiIndex& mi) const {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
    throw std::out_of_range("AffPolyMatrix::coeff");
  auto it = terms_.find(mi);
  if (it == terms_.end()) return LinExpr();
  return it->second[static_cast<size_t>(i) * cols_ + j];
}

std::vector<MultiIndex> AffPolyMatrix::monomials() const {
  std::vector<MultiIndex> out;
  for (const auto& [mi, g] : terms_) {
    bool nonzero = false;
    for (const auto& e : g)
      if (e.has_vars() || e.constant() != 0.0) {
        nonzero = true;
        break;
      }
    if (nonzero) out.push_back(mi);
  }
  return out;
}

AffPolyMatrix AffPolyMatrix::operator+(const AffPolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_ || nvars_ != o.nvars_)
    throw std::invalid_argument("AffPolyMatrix+: shape mismatch");
  AffPolyMatrix R = *this;
  for (const auto& [mi, g] : o.terms_) {
    auto& rg = R.grid(mi);
    for (size_t k = 0; k < g.size(); ++k) rg[k] += g[k];
  }
  return R;
}

AffPolyMatrix AffPolyMatrix::operator-(const AffPolyMatrix& o) const {
  return *this + (-o);
}

AffPolyMatrix AffPolyMatrix::operator-() const {
  AffPolyMatrix R = *this;
  for (auto& [mi, g] : R.terms_)
    for (auto& e : g) e *= -1.0;
  return R;
}

AffPolyMatrix AffPolyMatrix::operator*(double s) const {
  AffPolyMatrix R = *this;
  for (auto& [mi, g] : R.terms_)
    for (auto& e : g) e *= s;
  return R;
}

AffPolyMatrix AffPolyMatrix::operator*(const AffPolyMatrix& o) const {
  if (cols_ != o.rows_ || nvars_ != o.nvars_)
    throw std::invalid_argument("AffPolyMatrix*: shape mismatch");
  if (has_vars() && o.has_vars())
    throw std::invalid_argument(
        "bilinear expression: both factors contain decision variables");
  AffPolyMatrix R(rows_, o.cols_, nvars_);
  for (const auto& [ma, ga] : terms_) {
    for (const auto& [mb, gb] : o.terms_) {
      const MultiIndex mi = ma * mb;
      auto& rg = R.grid(mi);
      for (int i = 0; i < rows_; ++i)
        for (int k = 0; k < cols_; ++k) {
          const LinExpr& a = ga[static_cast<size_t>(i) * cols_ + k];
          if (!a.has_vars() && a.constant() == 0.0) continue;
          for (int j = 0; j < o.cols_; ++j) {
            const LinExpr& b = gb[static_cast<size_t>(k) * o.cols_ + j];
            if (!b.has_vars() && b.constant() == 0.0) continue;
            LinExpr prod;
            if (a.has_vars()) {
              prod = a * b.constant();
            } else {
              prod = b * a.constant();
            }
            rg[static_cast<size_t>(i) * o.cols_ + j] += prod;
          }
        }
    }
  }
  return R;
}

AffPolyMatrix AffPolyMatrix::transpose() const {
  AffPolyMatrix R(cols_, rows_, nvars_);
  for (const auto& [mi, g] : terms_) {
    auto& rg = R.grid(mi);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j)
        rg[static_cast<size_t>(j) * rows_ + i] = g[static_cast<size_t>(i) * cols_ + j];
  }
  return R;
}

void AffPolyMatrix::add_block(int r0, int c0, const AffPolyMatrix& M) {
  if (r0 < 0 || c0 < 0 || r0 + M.rows() > rows_ || c0 + M.cols() > cols_)
    throw std::out_of_range("AffPolyMatrix::add_block");
  if (M.nvars() != nvars_)
    throw std::invalid_argument("AffPolyMatrix::add_block: nvars mismatch");
  for (const auto& [mi, g] : M.terms_) {
    auto& rg = grid(mi);
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        rg[static_cast<size_t>(r0 + i) * cols_ + (c0 + j)] +=
            g[static_cast<size_t>(i) * M.cols() + j];
  }
}

AffPolyMatrix AffPolyMatrix::block(int r0, int c0, int rows, int cols) const {
  if (r0 < 0 || c0 < 0 || r0 + rows > rows_ || c0 + cols > cols_)
    throw std::out_of_range("AffPolyMatrix::block");
  AffPolyMatrix R(rows, cols, nvars_);
  for (const auto& [mi, g] : terms_) {
    auto& rg = R.grid(mi);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        rg[static_cast<size_t>(i) * cols + j] =
            g[static_cast<size_t>(r0 + i) * cols_ + (c0 + j)];
  }
  return R;
}

int AffPolyMatrix::degree() const {
  int d = 0;
  for (const auto& mi : monomials()) d = std::max(d, mi.degree());
  return d;
}

bool AffPolyMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (const auto& [mi, g] : terms_)
    for (int i = 0; i < rows_; ++i)
      for (int j = i + 1; j < cols_; ++j) {
        const LinExpr& a = g[static_cast<size_t>(i) * cols_ + j];
        const LinExpr& b = g[static_cast<size_t>(j) * cols_ + i];
        if (a.constant() != b.constant() || a.lin() != b.lin()) return false;
      }
  return true;
}

PolyMatrix AffPolyMatrix::substitute(const Eigen::VectorXd& scalars) const {
  PolyMatrix R(rows_, cols_, nvars_);
  for (const auto& [mi, g] : terms_)
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) {
        const double v = g[static_cast<size_t>(i) * cols_ + j].eval(scalars);
        if (v != 0.0) R.at(i, j).add_term(mi, v);
      }
  return R;
}

AffPolyMatrix operator*(const Eigen::MatrixXd& M, const AffPolyMatrix& P) {
  return AffPolyMatrix::from_const(M, P.nvars()) * P;
}

AffPolyMatrix operator*(const PolyMatrix& M, const AffPolyMatrix& P) {
  return AffPolyMatrix::from_const(M) * P;
}

AffPolyMatrix operator*(const AffPolyMatrix& P, const Eigen::MatrixXd& M) {
  return P * AffPolyMatrix::from_const(M, P.nvars());
}

AffPolyMatrix operator*(const LinExpr& s, const PolyMatrix& M) {
  AffPolyMatrix R(M.rows(), M.cols(), M.nvars());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      for (const auto& [mi, c] : M.at(i, j).terms()) R.coeff(i, j, mi) += s * c;
  return R;
}

AffPolyMatrix kron_with_vars(const AffPolyMatrix& M) {
  const int N = M.nvars();
  if (M.cols() != N)
    throw std::invalid_argument("kron_with_vars: cols must equal nvars");
  const int m = M.rows();
  AffPolyMatrix R(m * N, N, N);
  for (const auto& mi : M.monomials()) {
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < N; ++k) {
        const LinExpr c = M.coeff(i, k, mi);
        if (!c.has_vars() && c.constant() == 0.0) continue;
        for (int j = 0; j < N; ++j)
          R.coeff(i * N + j, k, mi * MultiIndex::unit(j)) += c;
      }
  }
  return R;
}

// ---------------------------------------------------------------------------

LinExpr SosProgram::scalar(const std::string& name) {
  vars_.push_back({VarKind::Scalar, name, next_id_, 1});
  return LinExpr::variable(next_id_++);
}

AffPolyMatrix SosProgram::symmetric(const std::string& name, int size, int nvars) {
  const int count = size * (size + 1) / 2;
  vars_.push_back({VarKind::Symmetric, name, next_id_, count, size, size, nvars, 0});
  AffPolyMatrix M(size, size, nvars);
  int id = next_id_;
  for (int j = 0; j < size; ++j)
    for (int i = j; i < size; ++i, ++id) {
      M.coeff(i, j, MultiIndex()) = LinExpr::variable(id);
      if (i != j) M.coeff(j, i, MultiIndex()) = LinExpr::variable(id);
    }
  next_id_ += count;
  return M;
}

AffPolyMatrix SosProgram::poly_matrix(const std::string& name, int rows, int cols,
                                      int nvars, int degree) {
  const auto basis = monomials_up_to_degree(nvars, degree);
  const int count = rows * cols * static_cast<int>(basis.size());
  vars_.push_back(
      {VarKind::PolyMatrix, name, next_id_, count, rows, cols, nvars, degree});
  AffPolyMatrix M(rows, cols, nvars);
  int id = next_id_;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      for (const auto& mi : basis) M.coeff(i, j, mi) = LinExpr::variable(id++);
  next_id_ += count;
  return M;
}

int SosProgram::add_sos_matrix(const AffPolyMatrix& expr, int alpha) {
  if (expr.rows() != expr.cols())
    throw std::invalid_argument("add_sos_matrix: expression must be square");
  if (!expr.is_symmetric())
    throw std::invalid_argument("add_sos_matrix: expression must be symmetric");
  if (expr.degree() > 2 * alpha)
    throw std::invalid_argument("add_sos_matrix: degree overflow (expr degree " +
                                std::to_string(expr.degree()) + " > 2*alpha = " +
                                std::to_string(2 * alpha) + ")");
  SosConstraintInfo info;
  info.id = static_cast<int>(sos_.size());
  info.dim = expr.rows();
  info.gram_degree = alpha;
  info.basis_size =
      static_cast<int>(monomials_up_to_degree(expr.nvars(), alpha).size());
  info.cone_index = -1;  // assigned at compile time
  info.expr = expr;
  sos_.push_back(std::move(info));
  return static_cast<int>(sos_.size()) - 1;
}

int SosProgram::add_strict_sos(const AffPolyMatrix& expr, int alpha, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("add_strict_sos: eps must be > 0");
  return add_sos_matrix(
      expr - AffPolyMatrix::identity(expr.rows(), expr.nvars()) * eps, alpha);
}

void SosProgram::add_psd(const AffPolyMatrix& expr) {
  if (expr.rows() != expr.cols() || !expr.is_symmetric())
    throw std::invalid_argument("add_psd: expression must be square symmetric");
  if (expr.degree() > 0)
    throw std::invalid_argument("add_psd: expression must be constant in z");
  PsdConstraintInfo info;
  info.dim = expr.rows();
  info.cone_index = -1;
  info.expr = expr;
  psd_.push_back(std::move(info));
}

void SosProgram::add_eq(const LinExpr& e) { eqs_.push_back(e); }
void SosProgram::add_ineq(const LinExpr& e) { ineqs_.push_back(e); }
void SosProgram::maximize(const LinExpr& objective) { objective_ = -objective; }
void SosProgram::minimize(const LinExpr& objective) { objective_ = objective; }

Compiled SosProgram::compile() const {
  Compiled out;
  out.num_scalars = next_id_;
  out.num_ineq = static_cast<int>(ineqs_.size());
  out.sos = sos_;
  out.psd = psd_;

  sdp::ConicProblem& p = out.problem;
  if (next_id_ > 0) p.cones.push_back({sdp::ConeKind::Free, next_id_});
  std::vector<int> offsets{0};
  int var_cursor = next_id_;
  for (auto& info : out.sos) {
    info.cone_index = static_cast<int>(p.cones.size());
    const int gdim = info.dim * info.basis_size;
    p.cones.push_back({sdp::ConeKind::Psd, gdim});
    offsets.push_back(var_cursor);
    var_cursor += sdp::svec_size(gdim);
  }
  for (auto& info : out.psd) {
    info.cone_index = static_cast<int>(p.cones.size());
    p.cones.push_back({sdp::ConeKind::Psd, info.dim});
    offsets.push_back(var_cursor);
    var_cursor += sdp::svec_size(info.dim);
  }
  int ineq_offset = var_cursor;
  if (!ineqs_.empty()) {
    p.cones.push_back({sdp::ConeKind::NonNeg, static_cast<int>(ineqs_.size())});
    offsets.push_back(var_cursor);
    var_cursor += static_cast<int>(ineqs_.size());
  }
  p.cols = var_cursor;
  // rebuild offsets aligned with cone list order
  out.cone_offsets.clear();
  {
    int off = 0;
    for (const auto& blk : p.cones) {
      out.cone_offsets.push_back(off);
      off += blk.vec_size();
    }
  }

  std::vector<Eigen::Triplet<double>>& T = p.A;
  std::vector<double> rhs;
  int row = 0;

  auto add_lin = [&](const LinExpr& e, double extra_const) {
    for (const auto& [id, c] : e.lin()) T.emplace_back(row, id, c);
    rhs.push_back(-(e.constant() + extra_const));
  };

  // SOS coefficient matching: for entry (i, j), i <= j, and monomial a:
  //   sum_{(k,l): m_k m_l = a} G[(i,k),(j,l)] = coeff_{ij,a}
  for (const auto& info : out.sos) {
    const auto basis = monomials_up_to_degree(info.expr.nvars(), info.gram_degree);
    const int M = static_cast<int>(basis.size());
    const int gdim = info.dim * M;
    const int base = out.cone_offsets[info.cone_index];
    // index of the svec component for Gram entry (a, b); returns scale too
    auto svec_entry = [&](int a, int b, double* scale) {
      if (a < b) std::swap(a, b);
      // column-major lower triangle: component (a, b) with a >= b
      const int idx = b * gdim - b * (b - 1) / 2 + (a - b);
      *scale = a == b ? 1.0 : 1.0 / kSqrt2;  // G_ab = scale * svec component
      return base + idx;
    };
    // gather the union of monomials: all basis products plus the expr's own
    std::map<MultiIndex, std::vector<std::pair<int, int>>> products;
    for (int k = 0; k < M; ++k)
      for (int l = 0; l < M; ++l) products[basis[k] * basis[l]].emplace_back(k, l);

    for (int i = 0; i < info.dim; ++i) {
      for (int j = i; j < info.dim; ++j) {
        for (const auto& [mono, pairs] : products) {
          // sum the Gram entries hitting this (i, j, mono) cell
          std::map<int, double> cols;  // svec var -> multiplier
          for (const auto& [k, l] : pairs) {
            double scale = 1.0;
            const int var = svec_entry(i * M + k, j * M + l, &scale);
            cols[var] += scale;
          }
          const LinExpr coeff = info.expr.coeff(i, j, mono);
          for (const auto& [var, mult] : cols) T.emplace_back(row, var, -mult);
          for (const auto& [id, c] : coeff.lin()) T.emplace_back(row, id, c);
          rhs.push_back(-coeff.constant());
          ++row;
        }
        // expr monomials that no basis product can reach must be zero; their
        // presence past degree 2*alpha is already rejected at add time, and
        // within degree they are always reachable for the full monomial basis
      }
    }
  }

  // constant-PSD linking: S = expr (svec-componentwise)
  for (const auto& info : out.psd) {
    const int base = out.cone_offsets[info.cone_index];
    int k = 0;
    for (int j = 0; j < info.dim; ++j)
      for (int i = j; i < info.dim; ++i, ++k) {
        const double scale = i == j ? 1.0 : kSqrt2;  // svec = scale * M_ij
        const LinExpr e = info.expr.coeff(i, j, MultiIndex());
        T.emplace_back(row, base + k, -1.0);
        for (const auto& [id, c] : e.lin()) T.emplace_back(row, id, c * scale);
        rhs.push_back(-e.constant() * scale);
        ++row;
      }
  }

  // scalar equalities and inequalities (with slack)
  for (const auto& e : eqs_) {
    add_lin(e, 0.0);
    ++row;
  }
  for (size_t k = 0; k < ineqs_.size(); ++k) {
    const LinExpr& e = ineqs_[k];
    for (const auto& [id, c] : e.lin()) T.emplace_back(row, id, c);
    T.emplace_back(row, ineq_offset + static_cast<int>(k), -1.0);
    rhs.push_back(-e.constant());
    ++row;
  }

  p.rows = row;
  p.b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  p.c = Eigen::VectorXd::Zero(p.cols);
  for (const auto& [id, c] : objective_.lin()) p.c[id] = c;
  p.validate();
  return out;
}

Eigen::VectorXd Compiled::scalars(const Eigen::VectorXd& v) const {
  return v.head(num_scalars);
}

Eigen::MatrixXd Compiled::gram(const Eigen::VectorXd& v, int sos_index) const {
  const auto& info = sos.at(sos_index);
  const int gdim = info.dim * info.basis_size;
  const int base = cone_offsets[info.cone_index];
  return sdp::svec_to_matrix(v.segment(base, sdp::svec_size(gdim)), gdim);
}

CertificateReport SosProgram::verify_certificate(const Compiled& compiled,
                                                 const Eigen::VectorXd& v) {
  CertificateReport rep;
  const Eigen::VectorXd scalars = compiled.scalars(v);
  for (size_t s = 0; s < compiled.sos.size(); ++s) {
    const auto& info = compiled.sos[s];
    const Eigen::MatrixXd G = compiled.gram(v, static_cast<int>(s));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    const double min_eig = eig.eigenvalues().minCoeff();

    // reconstruct the quadratic form coefficients and compare
    const auto basis = monomials_up_to_degree(info.expr.nvars(), info.gram_degree);
    const int M = static_cast<int>(basis.size());
    const PolyMatrix target = info.expr.substitute(scalars);
    double residual = 0.0;
    double max_coeff = 0.0;
    std::map<MultiIndex, std::vector<std::pair<int, int>>> products;
    for (int k = 0; k < M; ++k)
      for (int l = 0; l < M; ++l) products[basis[k] * basis[l]].emplace_back(k, l);
    for (int i = 0; i < info.dim; ++i)
      for (int j = i; j < info.dim; ++j) {
        for (const auto& [mono, pairs] : products) {
          double gsum = 0.0;
          for (const auto& [k, l] : pairs) gsum += G(i * M + k, j * M + l);
          const double want = target.at(i, j).coeff(mono);
          residual = std::max(residual, std::abs(gsum - want));
          max_coeff = std::max(max_coeff, std::abs(want));
        }
        // expression monomials outside the product set would be unmatched;
        // they cannot exist for a full monomial basis within 2*alpha
      }
    CertificateReport::Item item;
    item.constraint = static_cast<int>(s);
    item.residual = residual;
    item.min_eig = min_eig;
    item.max_coeff = max_coeff;
    item.pass = residual <= 1e-7 * (1.0 + max_coeff) && min_eig >= -1e-8;
    rep.pass = rep.pass && item.pass;
    rep.items.push_back(item);
  }
  return rep;
}

const DeclaredVar& SosProgram::find(const std::string& name, VarKind kind) const {
  for (const auto& vr : vars_)
    if (vr.name == name && vr.kind == kind) return vr;
  throw std::invalid_argument("no declared variable named " + name);
}

double SosProgram::value(const LinExpr& e, const Compiled& compiled,
                         const Eigen::VectorXd& v) const {
  return e.eval(compiled.scalars(v));
}

Eigen::MatrixXd SosProgram::value(const std::string& sym_name, const Compiled& compiled,
                                  const Eigen::VectorXd& v) const {
  const DeclaredVar& vr = find(sym_name, VarKind::Symmetric);
  Eigen::MatrixXd M(vr.rows, vr.cols);
  int id = vr.offset;
  for (int j = 0; j < vr.cols; ++j)
    for (int i = j; i < vr.rows; ++i, ++id) {
      M(i, j) = v[id];
      M(j, i) = v[id];
    }
  return M;
}

PolyMatrix SosProgram::value_poly(const std::string& poly_name, const Compiled& compiled,
                                  const Eigen::VectorXd& v) const {
  const DeclaredVar& vr = find(poly_name, VarKind::PolyMatrix);
  const auto basis = monomials_up_to_degree(vr.nvars, vr.degree);
  PolyMatrix M(vr.rows, vr.cols, vr.nvars);
  int id = vr.offset;
  for (int i = 0; i < vr.rows; ++i)
    for (int j = 0; j < vr.cols; ++j)
      for (const auto& mi : basis) {
        const double c = v[id++];
        if (c != 0.0) M.at(i, j).add_term(mi, c);
      }
  return M;
}

std::string SosProgram::dump() const {
  std::ostringstream os;
  os << "SosProgram: " << next_id_ << " scalars\n";
  for (const auto& vr : vars_) {
    os << "  var " << vr.name << " ";
    switch (vr.kind) {
      case VarKind::Scalar: os << "scalar"; break;
      case VarKind::Symmetric: os << "sym " << vr.rows << "x" << vr.cols; break;
      case VarKind::PolyMatrix:
        os << "poly " << vr.rows << "x" << vr.cols << " deg " << vr.degree;
        break;
    }
    os << " ids [" << vr.offset << ", " << vr.offset + vr.count << ")\n";
  }
  for (const auto& s : sos_)
    os << "  sos #" << s.id << ": dim " << s.dim << ", alpha " << s.gram_degree
       << ", basis " << s.basis_size << ", expr degree " << s.expr.degree() << "\n";
  for (const auto& s : psd_) os << "  psd: dim " << s.dim << "\n";
  os << "  " << eqs_.size() << " equalities, " << ineqs_.size() << " inequalities\n";
  return os.str();
}

}  // namespace sos
}  // namespace koopcert
