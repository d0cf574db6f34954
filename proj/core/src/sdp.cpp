#include "koopcert/sdp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

namespace koopcert {
namespace sdp {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

int svec_size(int s) { return s * (s + 1) / 2; }

Eigen::MatrixXd svec_to_matrix(const Eigen::VectorXd& x, int s) {
  Eigen::MatrixXd M(s, s);
  int k = 0;
  for (int j = 0; j < s; ++j)
    for (int i = j; i < s; ++i, ++k) {
      const double v = i == j ? x[k] : x[k] / kSqrt2;
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

Eigen::VectorXd matrix_to_svec(const Eigen::MatrixXd& M) {
  const int s = static_cast<int>(M.rows());
  Eigen::VectorXd x(svec_size(s));
  int k = 0;
  for (int j = 0; j < s; ++j)
    for (int i = j; i < s; ++i, ++k)
      x[k] = i == j ? M(i, j) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
  return x;
}

void ConicProblem::validate() const {
  int total = 0;
  for (const auto& blk : cones) {
    if (blk.size < 0) throw std::invalid_argument("cone block with negative size");
    total += blk.vec_size();
  }
  if (total != cols)
    throw std::invalid_argument("cone sizes do not partition the variable vector");
  if (c.size() != cols || b.size() != rows)
    throw std::invalid_argument("objective/rhs dimension mismatch");
  for (const auto& t : A)
    if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols)
      throw std::invalid_argument("triplet out of range");
}

Eigen::SparseMatrix<double> ConicProblem::matrix() const {
  Eigen::SparseMatrix<double> M(rows, cols);
  M.setFromTriplets(A.begin(), A.end());
  return M;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIters: return "max-iters";
  }
  return "?";
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("project_psd: eigendecomposition failed");
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

struct BlockSpan {
  ConeKind kind;
  int size;    // matrix dim for Psd
  int offset;  // start in the variable vector
  int len;     // vec length
};

std::vector<BlockSpan> block_spans(const ConicProblem& p) {
  std::vector<BlockSpan> spans;
  int off = 0;
  for (const auto& blk : p.cones) {
    spans.push_back({blk.kind, blk.size, off, blk.vec_size()});
    off += blk.vec_size();
  }
  return spans;
}

// cone projection in place
void project_cone(Eigen::VectorXd& x, const std::vector<BlockSpan>& spans) {
  for (const auto& s : spans) {
    if (s.len == 0) continue;
    switch (s.kind) {
      case ConeKind::Free:
        break;
      case ConeKind::NonNeg:
        x.segment(s.offset, s.len) = x.segment(s.offset, s.len).cwiseMax(0.0);
        break;
      case ConeKind::Psd: {
        const Eigen::MatrixXd M = svec_to_matrix(x.segment(s.offset, s.len), s.size);
        x.segment(s.offset, s.len) = matrix_to_svec(project_psd(M));
        break;
      }
    }
  }
}

// max violation of membership in K (for primal v) or K* (dual z restricted to
// free entries = 0)
double cone_violation(const Eigen::VectorXd& x, const std::vector<BlockSpan>& spans,
                      bool dual) {
  double viol = 0.0;
  for (const auto& s : spans) {
    if (s.len == 0) continue;
    switch (s.kind) {
      case ConeKind::Free:
        if (dual) viol = std::max(viol, x.segment(s.offset, s.len).cwiseAbs().maxCoeff());
        break;
      case ConeKind::NonNeg: {
        const double mn = x.segment(s.offset, s.len).minCoeff();
        viol = std::max(viol, std::max(0.0, -mn));
        break;
      }
      case ConeKind::Psd: {
        const Eigen::MatrixXd M = svec_to_matrix(x.segment(s.offset, s.len), s.size);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
        viol = std::max(viol, std::max(0.0, -eig.eigenvalues().minCoeff()));
        break;
      }
    }
  }
  return viol;
}

// Ruiz equilibration with congruence-constrained scalings on PSD blocks:
// column scalings inside a PSD block take the form e_p * e_q so that the
// scaled variables remain an exact PSD cone (X -> E X E).
struct Scaling {
  Eigen::VectorXd row;   // D
  Eigen::VectorXd col;   // E
  double s_b = 1.0, s_c = 1.0;
};

Scaling ruiz_equilibrate(Eigen::SparseMatrix<double>& A, Eigen::VectorXd& b,
                         Eigen::VectorXd& c, const std::vector<BlockSpan>& spans,
                         int sweeps) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Scaling sc;
  sc.row = Eigen::VectorXd::Ones(m);
  sc.col = Eigen::VectorXd::Ones(n);

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // column infinity norms
    Eigen::VectorXd colnorm = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        colnorm[it.col()] = std::max(colnorm[it.col()], std::abs(it.value()));
    Eigen::VectorXd e = Eigen::VectorXd::Ones(n);
    for (const auto& s : spans) {
      if (s.kind != ConeKind::Psd) {
        for (int j = 0; j < s.len; ++j) {
          const double cn = colnorm[s.offset + j];
          if (cn > 0) e[s.offset + j] = 1.0 / std::sqrt(cn);
        }
      } else {
        // fit log e_(p,q) = phi_p + phi_q to the desired per-column scale
        const int dim = s.size;
        Eigen::VectorXd rhs_sum = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd cnt = Eigen::VectorXd::Constant(dim, 0.0);
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
        int k = 0;
        std::vector<double> sigma(s.len, 0.0);
        for (int q = 0; q < dim; ++q)
          for (int p = q; p < dim; ++p, ++k) {
            const double cn = colnorm[s.offset + k];
            sigma[k] = cn > 0 ? -0.5 * std::log(cn) : 0.0;
          }
        // normal equations of sum_(p>=q) (phi_p + phi_q - sigma_pq)^2
        k = 0;
        for (int q = 0; q < dim; ++q)
          for (int p = q; p < dim; ++p, ++k) {
            gram(p, p) += 1;
            gram(q, q) += 1;
            gram(p, q) += 1;
            gram(q, p) += 1;
            rhs_sum[p] += sigma[k];
            rhs_sum[q] += sigma[k];
          }
        gram.diagonal().array() += 1e-12;
        const Eigen::VectorXd phi = gram.ldlt().solve(rhs_sum);
        k = 0;
        for (int q = 0; q < dim; ++q)
          for (int p = q; p < dim; ++p, ++k)
            e[s.offset + k] = std::exp(phi[p] + phi[q]);
      }
    }
    // row infinity norms after the column pass
    Eigen::VectorXd rownorm = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        rownorm[it.row()] = std::max(rownorm[it.row()],
                                     std::abs(it.value()) * e[it.col()]);
    Eigen::VectorXd d = Eigen::VectorXd::Ones(m);
    for (int i = 0; i < m; ++i)
      if (rownorm[i] > 0) d[i] = 1.0 / std::sqrt(rownorm[i]);

    // apply
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        it.valueRef() *= d[it.row()] * e[it.col()];
    sc.row.array() *= d.array();
    sc.col.array() *= e.array();
  }
  b.array() *= sc.row.array();
  c.array() *= sc.col.array();
  sc.s_b = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  sc.s_c = 1.0 + (c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
  if (b.size() > 0) b /= sc.s_b;
  c /= sc.s_c;
  return sc;
}

struct FarkasTest {
  bool primal_infeasible = false;
  bool dual_infeasible = false;
};

// best-effort certificates from candidate directions
FarkasTest farkas_check(const Eigen::SparseMatrix<double>& A,
                        const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                        const std::vector<BlockSpan>& spans,
                        const std::vector<Eigen::VectorXd>& y_candidates,
                        const std::vector<Eigen::VectorXd>& d_candidates,
                        double tol) {
  FarkasTest res;
  for (const auto& y0 : y_candidates) {
    for (double sgn : {1.0, -1.0}) {
      Eigen::VectorXd y = sgn * y0;
      const double ny = y.norm();
      if (!(ny > 1e-12)) continue;
      y /= ny;
      const double by = b.dot(y);
      if (by <= tol) continue;
      Eigen::VectorXd q = -(A.transpose() * y);
      // need q in K*: free components 0, nonneg >= 0, psd blocks PSD
      Eigen::VectorXd qn = q / by;  // normalize b'y = 1
      double viol = 0.0;
      for (const auto& s : spans) {
        if (s.len == 0) continue;
        switch (s.kind) {
          case ConeKind::Free:
            viol = std::max(viol, qn.segment(s.offset, s.len).cwiseAbs().maxCoeff());
            break;
          case ConeKind::NonNeg:
            viol = std::max(viol, std::max(0.0, -qn.segment(s.offset, s.len).minCoeff()));
            break;
          case ConeKind::Psd: {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
                svec_to_matrix(qn.segment(s.offset, s.len), s.size));
            viol = std::max(viol, std::max(0.0, -eig.eigenvalues().minCoeff()));
            break;
          }
        }
      }
      if (viol <= tol) {
        res.primal_infeasible = true;
        return res;
      }
    }
  }
  for (const auto& d0 : d_candidates) {
    Eigen::VectorXd d = d0;
    const double nd = d.norm();
    if (!(nd > 1e-12)) continue;
    d /= nd;
    if (c.dot(d) > -tol) continue;  // needs strictly improving direction
    if (A.rows() > 0 && (A * d).cwiseAbs().maxCoeff() > tol) continue;
    if (cone_violation(d, spans, false) > tol) continue;
    res.dual_infeasible = true;
    return res;
  }
  return res;
}

}  // namespace

SolveResult solve(const ConicProblem& prob, const SolveOptions& opts) {
  prob.validate();
  SolveResult out;
  const int n = prob.cols;
  const int m = prob.rows;
  if (n == 0) {
    out.status = (m == 0 || prob.b.lpNorm<Eigen::Infinity>() == 0.0)
                     ? SolveStatus::Optimal
                     : SolveStatus::Infeasible;
    out.v.resize(0);
    out.y = Eigen::VectorXd::Zero(m);
    return out;
  }

  const auto spans = block_spans(prob);
  Eigen::SparseMatrix<double> A = prob.matrix();
  Eigen::VectorXd b = prob.b, c = prob.c;
  const Scaling sc = ruiz_equilibrate(A, b, c, spans, opts.ruiz_sweeps);

  double sigma = opts.sigma;
  const double kkt_reg = 1e-8;

  // KKT = [sigma I, A'; A, -reg I]
  Eigen::SparseMatrix<double> kkt(n + m, n + m);
  auto build_kkt = [&]() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(A.nonZeros() * 2 + n + m);
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, sigma);
    for (int i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -kkt_reg);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
        trip.emplace_back(n + it.row(), it.col(), it.value());
        trip.emplace_back(it.col(), n + it.row(), it.value());
      }
    kkt.setFromTriplets(trip.begin(), trip.end());
  };
  build_kkt();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.analyzePattern(kkt);
  ldlt.factorize(kkt);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("sdp::solve: numerically singular KKT system");

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z_prev = z, nu_prev = nu;

  Eigen::VectorXd rhs(n + m), sol(n + m);

  const Eigen::SparseMatrix<double> A0 = prob.matrix();
  const Eigen::SparseMatrix<double> A0t = A0.transpose();
  const double bn = prob.b.size() ? prob.b.lpNorm<Eigen::Infinity>() : 0.0;
  const double cn = prob.c.size() ? prob.c.lpNorm<Eigen::Infinity>() : 0.0;

  auto unscale_v = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
    return sc.s_b * (sc.col.array() * zz.array()).matrix();
  };

  int it = 0;
  for (it = 1; it <= opts.max_iters; ++it) {
    // affine step
    rhs.head(n) = sigma * (z - w) - c;
    rhs.tail(m) = b;
    sol = ldlt.solve(rhs);
    // one refinement pass against the unregularized KKT action
    {
      Eigen::VectorXd resid(n + m);
      resid.head(n) = rhs.head(n) - (sigma * sol.head(n) + A.transpose() * sol.tail(m));
      resid.tail(m) = rhs.tail(m) - A * sol.head(n);
      sol += ldlt.solve(resid);
    }
    x = sol.head(n);
    nu = sol.tail(m);

    // cone step with over-relaxation
    const Eigen::VectorXd xr = opts.over_relax * x + (1.0 - opts.over_relax) * z;
    z_prev = z;
    z = xr + w;
    project_cone(z, spans);
    w += xr - z;

    if (it % opts.check_interval == 0) {
      // unscaled residuals at the cone-feasible iterate
      const Eigen::VectorXd v_u = unscale_v(z);
      const Eigen::VectorXd y_u = -sc.s_c * (sc.row.array() * nu.array()).matrix();
      const double pres =
          m ? (A0 * v_u - prob.b).lpNorm<Eigen::Infinity>() / (1.0 + bn) : 0.0;
      // dual residual: c - A'y - z_dual with z_dual = -sigma w (scaled), unscaled
      Eigen::VectorXd zd_u = sc.s_c * ((-sigma * w).array() / sc.col.array()).matrix();
      Eigen::VectorXd dres_vec = prob.c - A0t * y_u - zd_u;
      const double dres = dres_vec.lpNorm<Eigen::Infinity>() / (1.0 + cn);
      const double pobj = prob.c.dot(v_u);
      const double dobj = prob.b.dot(y_u);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (pres <= opts.tol_primal && dres <= opts.tol_dual && gap <= opts.tol_gap) {
        out.status = SolveStatus::Optimal;
        break;
      }
      if (it % (opts.check_interval * 10) == 0) {
        // infeasibility probes from accumulated directions
        std::vector<Eigen::VectorXd> ycand;
        std::vector<Eigen::VectorXd> dcand;
        const Eigen::VectorXd dnu = nu - nu_prev;
        ycand.push_back((sc.row.array() * dnu.array()).matrix());
        ycand.push_back((sc.row.array() * nu.array()).matrix());
        const Eigen::VectorXd dz = z - z_prev;
        dcand.push_back((sc.col.array() * dz.array()).matrix());
        nu_prev = nu;
        const FarkasTest ft =
            farkas_check(A0, prob.b, prob.c, spans, ycand, dcand, opts.infeas_tol);
        if (ft.primal_infeasible) {
          out.status = SolveStatus::Infeasible;
          break;
        }
        if (ft.dual_infeasible) {
          out.status = SolveStatus::Unbounded;
          break;
        }
      }
      if (opts.adaptive_sigma && it % (opts.check_interval * 4) == 0) {
        const double rp = (x - z).norm();
        const double rd = sigma * (z - z_prev).norm();
        if (rp > 10.0 * rd && sigma < 1e6) {
          sigma *= 2.0;
          w *= 0.5;  // rescaled dual keeps sigma*w continuous
          build_kkt();
          ldlt.factorize(kkt);
        } else if (rd > 10.0 * rp && sigma > 1e-6) {
          sigma *= 0.5;
          w *= 2.0;
          build_kkt();
          ldlt.factorize(kkt);
        }
      }
    }
  }
  out.iters = std::min(it, opts.max_iters);

  // final report, recomputed from scratch on the returned point
  out.v = unscale_v(z);
  out.y = -sc.s_c * (sc.row.array() * nu.array()).matrix();
  out.objective = prob.c.dot(out.v);
  out.primal_res = m ? (A0 * out.v - prob.b).lpNorm<Eigen::Infinity>() / (1.0 + bn) : 0.0;
  Eigen::VectorXd zd_u =
      sc.s_c * ((-sigma * w).array() / sc.col.array()).matrix();
  out.dual_res =
      (prob.c - A0.transpose() * out.y - zd_u).lpNorm<Eigen::Infinity>() / (1.0 + cn);
  const double dobj = prob.b.dot(out.y);
  out.gap = std::abs(out.objective - dobj) /
            (1.0 + std::abs(out.objective) + std::abs(dobj));
  if (out.status == SolveStatus::MaxIters)
    out.message = "iteration limit reached";
  return out;
}

void SolveResult::save_json(const std::string& path) const {
  nlohmann::json j;
  j["status"] = to_string(status);
  j["objective"] = objective;
  j["primal_res"] = primal_res;
  j["dual_res"] = dual_res;
  j["gap"] = gap;
  j["iterations"] = iters;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write solve result to " + path);
  os << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// SDPA sparse interchange

namespace {

struct SdpaLayout {
  // SDPA block description: positive = dense PSD block, negative = diagonal
  std::vector<int> block_sizes;
  // for every conic variable: its SDPA (block, i, j) triple for the v+ part
  struct Pos {
    int blk, i, j;       // 1-based
    int neg_blk, neg_i;  // second diagonal entry for free vars, else 0
    double coef;         // triplet coefficient -> matrix entry factor
  };
  std::vector<Pos> pos;
};

SdpaLayout layout_of(const ConicProblem& p) {
  SdpaLayout L;
  L.pos.resize(p.cols);
  int off = 0;
  for (const auto& blk : p.cones) {
    if (blk.kind == ConeKind::Psd) {
      L.block_sizes.push_back(blk.size);
      const int b = static_cast<int>(L.block_sizes.size());
      int k = 0;
      for (int j = 0; j < blk.size; ++j)
        for (int i = j; i < blk.size; ++i, ++k)
          // svec coefficient a on sqrt(2) X_ij contributes a/sqrt(2) to F_ij
          L.pos[off + k] = {b, j + 1, i + 1, 0, 0, i == j ? 1.0 : 1.0 / kSqrt2};
      off += blk.vec_size();
    } else if (blk.kind == ConeKind::NonNeg) {
      L.block_sizes.push_back(-blk.size);
      const int b = static_cast<int>(L.block_sizes.size());
      for (int i = 0; i < blk.size; ++i)
        L.pos[off + i] = {b, i + 1, i + 1, 0, 0, 1.0};
      off += blk.size;
    } else {  // Free: v = v+ - v-
      L.block_sizes.push_back(-blk.size);
      const int bp = static_cast<int>(L.block_sizes.size());
      L.block_sizes.push_back(-blk.size);
      const int bm = static_cast<int>(L.block_sizes.size());
      for (int i = 0; i < blk.size; ++i)
        L.pos[off + i] = {bp, i + 1, i + 1, bm, i + 1, 1.0};
      off += blk.size;
    }
  }
  return L;
}

struct Entry {
  int matno, blk, i, j;
  double value;
  bool operator<(const Entry& o) const {
    return std::tie(matno, blk, i, j) < std::tie(o.matno, o.blk, o.i, o.j);
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void export_interchange(const ConicProblem& prob, const std::string& path) {
  prob.validate();
  const SdpaLayout L = layout_of(prob);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);

  os << "\"koopcert cones:";
  for (const auto& blk : prob.cones) {
    const char tag = blk.kind == ConeKind::Free ? 'f'
                     : blk.kind == ConeKind::NonNeg ? 'l' : 's';
    os << " " << tag << blk.size;
  }
  os << "\n";
  os << prob.rows << "\n";
  os << L.block_sizes.size() << "\n";
  for (size_t i = 0; i < L.block_sizes.size(); ++i)
    os << (i ? " " : "") << L.block_sizes[i];
  os << "\n";
  for (int i = 0; i < prob.rows; ++i) os << (i ? " " : "") << fmt(prob.b[i]);
  os << "\n";

  std::vector<Entry> entries;
  // objective: F0 encodes -c (so that max tr(F0 Y) = -min c'v)
  for (int j = 0; j < prob.cols; ++j) {
    if (prob.c[j] == 0.0) continue;
    const auto& P = L.pos[j];
    entries.push_back({0, P.blk, P.i, P.j, -prob.c[j] * P.coef});
    if (P.neg_blk) entries.push_back({0, P.neg_blk, P.neg_i, P.neg_i, prob.c[j] * P.coef});
  }
  for (const auto& t : prob.A) {
    const auto& P = L.pos[t.col()];
    entries.push_back({t.row() + 1, P.blk, P.i, P.j, t.value() * P.coef});
    if (P.neg_blk)
      entries.push_back({t.row() + 1, P.neg_blk, P.neg_i, P.neg_i, -t.value() * P.coef});
  }
  std::sort(entries.begin(), entries.end());
  // merge duplicates so the file is canonical
  std::vector<Entry> merged;
  for (const auto& e : entries) {
    if (!merged.empty() && !(merged.back() < e) && !(e < merged.back()))
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  for (const auto& e : merged) {
    if (e.value == 0.0) continue;
    os << e.matno << " " << e.blk << " " << e.i << " " << e.j << " " << fmt(e.value)
       << "\n";
  }
}

ConicProblem import_interchange(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  int lineno = 0;
  std::vector<ConeBlock> cones;
  bool have_cones = false;

  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
  };

  // comments / cone header
  std::string content_line;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '"' || line[0] == '*') {
      const std::string tag = "koopcert cones:";
      const auto pos = line.find(tag);
      if (pos != std::string::npos) {
        std::istringstream cs(line.substr(pos + tag.size()));
        std::string tok;
        while (cs >> tok) {
          if (tok.size() < 2) fail("malformed cone token");
          const int sz = std::stoi(tok.substr(1));
          if (tok[0] == 'f') cones.push_back({ConeKind::Free, sz});
          else if (tok[0] == 'l') cones.push_back({ConeKind::NonNeg, sz});
          else if (tok[0] == 's') cones.push_back({ConeKind::Psd, sz});
          else fail("unknown cone tag");
        }
        have_cones = true;
      }
      continue;
    }
    content_line = line;
    break;
  }
  if (!have_cones) fail("missing koopcert cone header (foreign SDPA files need it)");
  if (content_line.empty()) fail("missing constraint count");

  ConicProblem p;
  p.cones = cones;
  p.cols = 0;
  for (const auto& blk : cones) p.cols += blk.vec_size();

  try {
    p.rows = std::stoi(content_line);
  } catch (...) {
    fail("cannot parse constraint count");
  }
  int nblocks = 0;
  if (!(is >> nblocks)) fail("cannot parse block count");
  std::vector<int> bsizes(nblocks);
  for (int i = 0; i < nblocks; ++i)
    if (!(is >> bsizes[i])) fail("cannot parse block sizes");
  p.b.resize(p.rows);
  for (int i = 0; i < p.rows; ++i)
    if (!(is >> p.b[i])) fail("cannot parse rhs vector");

  // invert the layout: map (blk, i, j) -> variable index
  const SdpaLayout L = [&] {
    ConicProblem tmp;
    tmp.cones = cones;
    tmp.cols = p.cols;
    tmp.rows = 0;
    tmp.c = Eigen::VectorXd::Zero(p.cols);
    tmp.b = Eigen::VectorXd();
    return layout_of(tmp);
  }();
  if (static_cast<int>(L.block_sizes.size()) != nblocks)
    fail("block structure does not match the cone header");
  std::map<std::tuple<int, int, int>, int> lookup;  // (blk,i,j) -> var
  std::map<std::tuple<int, int, int>, int> neg_lookup;
  for (int v = 0; v < p.cols; ++v) {
    const auto& P = L.pos[v];
    lookup[{P.blk, P.i, P.j}] = v;
    if (P.neg_blk) neg_lookup[{P.neg_blk, P.neg_i, P.neg_i}] = v;
  }

  p.c = Eigen::VectorXd::Zero(p.cols);
  int matno, blk, ii, jj;
  double value;
  while (is >> matno >> blk >> ii >> jj >> value) {
    ++lineno;
    const auto key = std::make_tuple(blk, std::min(ii, jj), std::max(ii, jj));
    const auto it = lookup.find(key);
    if (it != lookup.end()) {
      const double coef = L.pos[it->second].coef;
      if (matno == 0)
        p.c[it->second] = -value / coef;
      else
        p.A.emplace_back(matno - 1, it->second, value / coef);
      continue;
    }
    const auto itn = neg_lookup.find(key);
    if (itn == neg_lookup.end()) fail("entry outside the declared layout");
    // the v- mirror entries carry no extra information
  }
  return p;
}

}  // namespace sdp
}  // namespace koopcert
