#include "koopcert/edmd.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace koopcert {

using nlohmann::json;

namespace {

// minimum-norm least-squares solution of min_M ||Y - M X||_F
Eigen::MatrixXd min_norm_lsq(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                             bool* rank_deficient) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double thresh = 1e-10 * svd.singularValues()(0);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++rank;
  if (rank < X.rows() && rank_deficient) *rank_deficient = true;
  // pinv(X) = V S^+ U^T;  M = Y pinv(X)
  Eigen::VectorXd sinv = Eigen::VectorXd::Zero(svd.singularValues().size());
  for (int i = 0; i < rank; ++i) sinv(i) = 1.0 / svd.singularValues()(i);
  return Y * (svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose());
}

}  // namespace

Eigen::VectorXd SurrogateModel::predict(const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& u) const {
  const int N = lifted_dim();
  const int m = input_dim();
  if (z.size() != N || u.size() != m)
    throw std::invalid_argument("predict: dimension mismatch");
  Eigen::VectorXd out = A * z + B0 * u;
  for (int i = 0; i < m; ++i)
    if (u[i] != 0.0) out += u[i] * (Btilde.middleCols(i * N, N) * z);
  return out;
}

SurrogateModel fit(const Dataset& data, const ObservableDictionary& dict) {
  if (data.blocks.size() < 2)
    throw std::invalid_argument("fit: dataset must hold the (m+1) input blocks");
  const LiftedData lifted = build_matrices(dict, data);
  const int N = dict.lifted_dim();
  const int m = static_cast<int>(data.blocks.size()) - 1;

  bool rank_deficient = false;
  SurrogateModel model{dict, Eigen::MatrixXd(), Eigen::MatrixXd(), Eigen::MatrixXd()};
  model.A = min_norm_lsq(lifted.Yu[0], lifted.X0, &rank_deficient);
  model.B0.resize(N, m);
  model.Btilde.resize(N, m * N);
  for (int i = 0; i < m; ++i) {
    const Eigen::MatrixXd bB =
        min_norm_lsq(lifted.Yu[i + 1], lifted.Xei[i], &rank_deficient);
    model.B0.col(i) = bB.col(0);
    model.Btilde.middleCols(i * N, N) = bB.rightCols(N) - model.A;
  }
  model.domain = data.domain;
  model.dt = data.dt;
  model.meta.d = data.d;
  model.meta.seed = data.seed;
  model.meta.rank_deficient = rank_deficient;
  return model;
}

Eigen::VectorXd residual(const SurrogateModel& model, const ControlAffineSystem& sys,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  const Eigen::VectorXd z = model.dict.lift(x);
  const Eigen::VectorXd pred = model.predict(z, u);
  if (model.domain == Domain::Continuous) {
    return model.dict.jacobian(x) * sys.rhs(x, u) - pred;
  }
  const SimConfig cfg = SimConfig::for_sampling(model.dt, model.dt);
  const Trajectory tr = integrate(sys, x, [&](double) { return u; }, cfg);
  if (tr.diverged)
    throw std::runtime_error("residual: flow diverged at t=" +
                             std::to_string(tr.diverged_at));
  return model.dict.lift(tr.back_state()) - pred;
}

ErrorBoundFit fit_error_constants(SurrogateModel& model, const ControlAffineSystem& sys,
                                  const Box& state_box, const ValidationSpec& spec) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  Box ubox = spec.input_box;
  if (ubox.dim() == 0) ubox = Box::centered(m, 1.0);

  ErrorBoundFit fitres;
  fitres.margin = spec.margin;
  fitres.support = spec.samples;
  double worst = 0.0;
  Eigen::VectorXd wx = Eigen::VectorXd::Zero(n), wu = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < spec.samples; ++j) {
    Eigen::VectorXd x(n), u(m);
    for (int i = 0; i < n; ++i)
      x[i] = uniform_sample(spec.seed, 101, j, i, state_box.lo[i], state_box.hi[i]);
    for (int i = 0; i < m; ++i)
      u[i] = uniform_sample(spec.seed, 202, j, i, ubox.lo[i], ubox.hi[i]);
    const double rnorm = residual(model, sys, x, u).norm();
    const double den = model.dict.lift(x).norm() + spec.kappa * u.norm();
    if (den < 1e-14) continue;  // only the exact equilibrium, where r = 0
    const double ratio = rnorm / den;
    if (ratio > worst) {
      worst = ratio;
      wx = x;
      wu = u;
    }
  }
  fitres.max_ratio = worst;
  fitres.c_x = worst * spec.margin;
  fitres.c_u = spec.kappa * fitres.c_x;
  fitres.worst_x = wx;
  fitres.worst_u = wu;
  model.c_x = fitres.c_x;
  model.c_u = fitres.c_u;
  model.meta.margin = spec.margin;
  return fitres;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) M(i, k) = j[i][k];
  return M;
}

}  // namespace

void SurrogateModel::save(const std::string& path) const {
  json j;
  j["domain"] = domain == Domain::Continuous ? "continuous" : "discrete";
  j["dt"] = dt;
  j["state_dim"] = dict.state_dim();
  json comps = json::array();
  for (const auto& p : dict.components()) comps.push_back(p.to_string());
  j["dictionary"] = comps;
  j["A"] = matrix_to_json(A);
  j["B0"] = matrix_to_json(B0);
  j["Btilde"] = matrix_to_json(Btilde);
  j["c_x"] = c_x;
  j["c_u"] = c_u;
  j["meta"] = {{"d", meta.d},
               {"seed", meta.seed},
               {"delta", meta.delta},
               {"margin", meta.margin},
               {"rank_deficient", meta.rank_deficient}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write surrogate to " + path);
  os << j.dump(2) << "\n";
}

SurrogateModel load_surrogate_impl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open surrogate " + path);
  json j;
  is >> j;
  const int n = j.at("state_dim");
  std::vector<Polynomial> comps;
  for (const auto& s : j.at("dictionary"))
    comps.push_back(Polynomial::parse(s.get<std::string>(), n));
  SurrogateModel model{ObservableDictionary(n, std::move(comps)),
                       matrix_from_json(j.at("A")), matrix_from_json(j.at("B0")),
                       matrix_from_json(j.at("Btilde"))};
  model.domain = j.at("domain") == "continuous" ? Domain::Continuous : Domain::Discrete;
  model.dt = j.at("dt");
  model.c_x = j.at("c_x");
  model.c_u = j.at("c_u");
  model.meta.d = j.at("meta").at("d");
  model.meta.seed = j.at("meta").at("seed");
  model.meta.delta = j.at("meta").at("delta");
  model.meta.margin = j.at("meta").at("margin");
  model.meta.rank_deficient = j.at("meta").at("rank_deficient");
  return model;
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  return load_surrogate_impl(path);
}

}  // namespace koopcert
