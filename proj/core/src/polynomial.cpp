#include "koopcert/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace koopcert {

MultiIndex::MultiIndex(std::vector<int> exponents) : exps_(std::move(exponents)) {
  for (int e : exps_) {
    if (e < 0) throw std::invalid_argument("MultiIndex: negative exponent");
  }
  while (!exps_.empty() && exps_.back() == 0) exps_.pop_back();
  degree_ = std::accumulate(exps_.begin(), exps_.end(), 0);
}

MultiIndex MultiIndex::unit(int var, int power) {
  std::vector<int> e(var + 1, 0);
  e[var] = power;
  return MultiIndex(std::move(e));
}

int MultiIndex::exponent(int var) const {
  return (var >= 0 && var < static_cast<int>(exps_.size())) ? exps_[var] : 0;
}

MultiIndex MultiIndex::operator*(const MultiIndex& o) const {
  std::vector<int> e(std::max(exps_.size(), o.exps_.size()), 0);
  for (size_t i = 0; i < e.size(); ++i)
    e[i] = exponent(static_cast<int>(i)) + o.exponent(static_cast<int>(i));
  return MultiIndex(std::move(e));
}

bool MultiIndex::operator<(const MultiIndex& o) const {
  if (degree_ != o.degree_) return degree_ < o.degree_;
  const size_t n = std::max(exps_.size(), o.exps_.size());
  for (size_t i = 0; i < n; ++i) {
    const int a = exponent(static_cast<int>(i));
    const int b = o.exponent(static_cast<int>(i));
    if (a != b) return a > b;  // larger leading exponent sorts first
  }
  return false;
}

std::vector<MultiIndex> monomials_up_to_degree(int nvars, int d) {
  if (nvars < 1) throw std::invalid_argument("monomials_up_to_degree: nvars >= 1");
  if (d < 0) throw std::invalid_argument("monomials_up_to_degree: d >= 0");
  std::vector<MultiIndex> out;
  std::vector<int> cur(nvars, 0);
  // enumerate per total degree, descending-lex within a degree
  for (int total = 0; total <= d; ++total) {
    std::function<void(int, int)> rec = [&](int pos, int rem) {
      if (pos == nvars - 1) {
        cur[pos] = rem;
        out.emplace_back(cur);
        return;
      }
      for (int e = rem; e >= 0; --e) {
        cur[pos] = e;
        rec(pos + 1, rem - e);
      }
    };
    rec(0, total);
  }
  return out;
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(MultiIndex(), c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int var) {
  if (var < 0 || var >= nvars) throw std::invalid_argument("variable index out of range");
  Polynomial p(nvars);
  p.add_term(MultiIndex::unit(var), 1.0);
  return p;
}

Polynomial Polynomial::monomial(int nvars, const MultiIndex& mi, double coef) {
  if (static_cast<int>(mi.exponents().size()) > nvars)
    throw std::invalid_argument("monomial exceeds variable count");
  Polynomial p(nvars);
  p.add_term(mi, coef);
  return p;
}

int Polynomial::degree() const {
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

double Polynomial::coeff(const MultiIndex& mi) const {
  auto it = terms_.find(mi);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const MultiIndex& mi, double coef) {
  if (static_cast<int>(mi.exponents().size()) > nvars_)
    throw std::invalid_argument("term exceeds variable count");
  auto it = terms_.find(mi);
  if (it == terms_.end()) {
    if (coef != 0.0) terms_.emplace(mi, coef);
  } else {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

void Polynomial::check_compatible(const Polynomial& o) const {
  if (nvars_ != o.nvars_)
    throw std::invalid_argument("polynomial variable counts differ");
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_compatible(o);
  for (const auto& [mi, c] : o.terms_) add_term(mi, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_compatible(o);
  for (const auto& [mi, c] : o.terms_) add_term(mi, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [mi, c] : terms_) c *= s;
  return *this;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r += o;
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r = *this;
  r -= o;
  return r;
}

Polynomial Polynomial::operator-() const {
  Polynomial r = *this;
  r *= -1.0;
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_compatible(o);
  Polynomial r(nvars_);
  for (const auto& [a, ca] : terms_)
    for (const auto& [b, cb] : o.terms_) r.add_term(a * b, ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r = *this;
  r *= s;
  return r;
}

double Polynomial::eval(const Eigen::VectorXd& point) const {
  if (point.size() != nvars_)
    throw std::invalid_argument("eval: point dimension mismatch");
  double acc = 0.0;
  for (const auto& [mi, c] : terms_) {
    double t = c;
    const auto& e = mi.exponents();
    for (size_t i = 0; i < e.size(); ++i) {
      for (int k = 0; k < e[i]; ++k) t *= point[static_cast<int>(i)];
    }
    acc += t;
  }
  return acc;
}

Polynomial Polynomial::derivative(int var) const {
  if (var < 0 || var >= nvars_) throw std::invalid_argument("derivative: bad variable");
  Polynomial r(nvars_);
  for (const auto& [mi, c] : terms_) {
    const int e = mi.exponent(var);
    if (e == 0) continue;
    std::vector<int> exps = mi.exponents();
    exps[var] -= 1;
    r.add_term(MultiIndex(std::move(exps)), c * e);
  }
  return r;
}

std::vector<Polynomial> Polynomial::gradient() const {
  std::vector<Polynomial> g;
  g.reserve(nvars_);
  for (int i = 0; i < nvars_; ++i) g.push_back(derivative(i));
  return g;
}

Polynomial Polynomial::embed(int new_nvars) const {
  if (new_nvars < nvars_) throw std::invalid_argument("embed: cannot shrink variable set");
  Polynomial r(new_nvars);
  for (const auto& [mi, c] : terms_) r.add_term(mi, c);
  return r;
}

Polynomial Polynomial::compress(double tol) const {
  Polynomial r(nvars_);
  for (const auto& [mi, c] : terms_)
    if (std::abs(c) > tol) r.add_term(mi, c);
  return r;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [mi, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    const auto& e = mi.exponents();
    for (size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) continue;
      os << " * z" << (i + 1);
      if (e[i] > 1) os << "^" << e[i];
    }
  }
  return os.str();
}

namespace {

void skip_ws(const std::string& s, size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

}  // namespace

Polynomial Polynomial::parse(const std::string& text, int nvars) {
  Polynomial p(nvars);
  size_t i = 0;
  skip_ws(text, i);
  if (i >= text.size()) throw std::invalid_argument("parse: empty polynomial text");
  bool expect_term = true;
  double sign = 1.0;
  while (i < text.size()) {
    skip_ws(text, i);
    if (i >= text.size()) break;
    if (!expect_term) {
      if (text[i] == '+') {
        sign = 1.0;
      } else if (text[i] == '-') {
        sign = -1.0;
      } else {
        throw std::invalid_argument("parse: expected '+' or '-' near '" +
                                    text.substr(i, 8) + "'");
      }
      ++i;
      expect_term = true;
      continue;
    }
    // term: [number] [* zK[^E]]* or bare variable product
    double coef = sign;
    bool saw_number = false;
    skip_ws(text, i);
    if (i < text.size() &&
        (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
         text[i] == '-' || text[i] == '+')) {
      size_t used = 0;
      coef = sign * std::stod(text.substr(i), &used);
      i += used;
      saw_number = true;
    }
    std::vector<int> exps(nvars, 0);
    bool saw_var = false;
    while (true) {
      skip_ws(text, i);
      size_t j = i;
      if (j < text.size() && text[j] == '*') {
        ++j;
        skip_ws(text, j);
      }
      if (j >= text.size() || text[j] != 'z') break;
      ++j;
      size_t used = 0;
      int var = std::stoi(text.substr(j), &used);
      if (var < 1 || var > nvars)
        throw std::invalid_argument("parse: variable z" + std::to_string(var) +
                                    " out of range");
      j += used;
      int e = 1;
      if (j < text.size() && text[j] == '^') {
        ++j;
        e = std::stoi(text.substr(j), &used);
        j += used;
      }
      exps[var - 1] += e;
      saw_var = true;
      i = j;
    }
    if (!saw_number && !saw_var)
      throw std::invalid_argument("parse: malformed term near '" +
                                  text.substr(i, 8) + "'");
    p.add_term(MultiIndex(exps), coef);
    expect_term = false;
    sign = 1.0;
  }
  if (expect_term) throw std::invalid_argument("parse: dangling operator");
  return p;
}

PolyMatrix::PolyMatrix(int rows, int cols, int nvars)
    : rows_(rows), cols_(cols), nvars_(nvars),
      e_(static_cast<size_t>(rows) * cols, Polynomial(nvars)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("PolyMatrix: bad shape");
}

PolyMatrix PolyMatrix::identity(int n, int nvars) {
  PolyMatrix M(n, n, nvars);
  for (int i = 0; i < n; ++i) M.at(i, i) = Polynomial::constant(nvars, 1.0);
  return M;
}

PolyMatrix PolyMatrix::from_constant(const Eigen::MatrixXd& M, int nvars) {
  PolyMatrix R(static_cast<int>(M.rows()), static_cast<int>(M.cols()), nvars);
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) R.at(i, j) = Polynomial::constant(nvars, M(i, j));
  return R;
}

Polynomial& PolyMatrix::at(int i, int j) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
    throw std::out_of_range("PolyMatrix::at");
  return e_[static_cast<size_t>(i) * cols_ + j];
}

const Polynomial& PolyMatrix::at(int i, int j) const {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
    throw std::out_of_range("PolyMatrix::at");
  return e_[static_cast<size_t>(i) * cols_ + j];
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_ || nvars_ != o.nvars_)
    throw std::invalid_argument("PolyMatrix+: shape/nvars mismatch");
  PolyMatrix R = *this;
  for (size_t k = 0; k < e_.size(); ++k) R.e_[k] += o.e_[k];
  return R;
}

PolyMatrix PolyMatrix::operator-(const PolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_ || nvars_ != o.nvars_)
    throw std::invalid_argument("PolyMatrix-: shape/nvars mismatch");
  PolyMatrix R = *this;
  for (size_t k = 0; k < e_.size(); ++k) R.e_[k] -= o.e_[k];
  return R;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& o) const {
  if (cols_ != o.rows_ || nvars_ != o.nvars_)
    throw std::invalid_argument("PolyMatrix*: shape/nvars mismatch");
  PolyMatrix R(rows_, o.cols_, nvars_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < o.cols_; ++j) {
      Polynomial acc(nvars_);
      for (int k = 0; k < cols_; ++k) acc += at(i, k) * o.at(k, j);
      R.at(i, j) = std::move(acc);
    }
  return R;
}

PolyMatrix PolyMatrix::operator*(const Polynomial& p) const {
  PolyMatrix R = *this;
  for (auto& q : R.e_) q = q * p;
  return R;
}

PolyMatrix PolyMatrix::operator*(double s) const {
  PolyMatrix R = *this;
  for (auto& q : R.e_) q *= s;
  return R;
}

PolyMatrix PolyMatrix::transpose() const {
  PolyMatrix R(cols_, rows_, nvars_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) R.at(j, i) = at(i, j);
  return R;
}

Eigen::MatrixXd PolyMatrix::eval(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd M(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) M(i, j) = at(i, j).eval(z);
  return M;
}

int PolyMatrix::degree() const {
  int d = 0;
  for (const auto& p : e_) d = std::max(d, p.is_zero() ? 0 : p.degree());
  return d;
}

bool PolyMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j)
      if (!(at(i, j) == at(j, i))) return false;
  return true;
}

PolyMatrix operator*(const Eigen::MatrixXd& M, const PolyMatrix& P) {
  return PolyMatrix::from_constant(M, P.nvars()) * P;
}

PolyMatrix operator*(const PolyMatrix& P, const Eigen::MatrixXd& M) {
  return P * PolyMatrix::from_constant(M, P.nvars());
}

PolyMatrix kron_with_vars(const PolyMatrix& M) {
  const int N = M.nvars();
  if (M.cols() != N)
    throw std::invalid_argument("kron_with_vars: cols must equal nvars");
  const int m = M.rows();
  PolyMatrix R(m * N, N, N);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < N; ++j) {
      const Polynomial zj = Polynomial::variable(N, j);
      for (int k = 0; k < N; ++k) R.at(i * N + j, k) = zj * M.at(i, k);
    }
  return R;
}

}  // namespace koopcert
