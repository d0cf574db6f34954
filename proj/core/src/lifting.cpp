#include "koopcert/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace koopcert {

using nlohmann::json;

ObservableDictionary::ObservableDictionary(int state_dim,
                                           std::vector<Polynomial> components)
    : n_(state_dim), N_(static_cast<int>(components.size())),
      comps_(std::move(components)) {
  if (N_ < n_) throw std::invalid_argument("dictionary smaller than the state");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n_);
  for (int k = 0; k < N_; ++k) {
    if (comps_[k].nvars() != n_)
      throw std::invalid_argument("dictionary component nvars mismatch");
    if (comps_[k].coeff(MultiIndex()) != 0.0)
      throw std::invalid_argument("dictionary component has a constant term");
  }
  for (int i = 0; i < n_; ++i) {
    if (!(comps_[i] == Polynomial::variable(n_, i)))
      throw std::invalid_argument(
          "dictionary components 1..n must be the coordinate functions");
  }
}

Eigen::VectorXd ObservableDictionary::lift(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("lift: dimension mismatch");
  Eigen::VectorXd z(N_);
  for (int k = 0; k < N_; ++k) z[k] = comps_[k].eval(x);
  return z;
}

Eigen::MatrixXd ObservableDictionary::jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("jacobian: dimension mismatch");
  Eigen::MatrixXd J(N_, n_);
  for (int k = 0; k < N_; ++k)
    for (int i = 0; i < n_; ++i) J(k, i) = comps_[k].derivative(i).eval(x);
  return J;
}

ObservableDictionary ObservableDictionary::identity(int n) {
  std::vector<Polynomial> c;
  for (int i = 0; i < n; ++i) c.push_back(Polynomial::variable(n, i));
  return ObservableDictionary(n, std::move(c));
}

ObservableDictionary ObservableDictionary::slow_manifold(double rho, double lambda) {
  const int n = 2;
  std::vector<Polynomial> c;
  c.push_back(Polynomial::variable(n, 0));
  c.push_back(Polynomial::variable(n, 1));
  const double a = lambda / (lambda - 2.0 * rho);
  Polynomial x1 = Polynomial::variable(n, 0);
  c.push_back(Polynomial::variable(n, 1) - x1 * x1 * a);
  c.push_back(x1 * Polynomial::variable(n, 1));
  return ObservableDictionary(n, std::move(c));
}

// splitmix64; one stream index per (block, sample, dim)
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double uniform_sample(std::uint64_t seed, std::uint64_t block, std::uint64_t sample,
                      std::uint64_t dim, double lo, double hi) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(block + 0x1234));
  s = splitmix64(s ^ splitmix64(sample + 0x9876));
  s = splitmix64(s ^ splitmix64(dim + 0x55aa));
  const double u = static_cast<double>(s >> 11) * 0x1.0p-53;  // [0,1)
  return lo + u * (hi - lo);
}

Dataset generate_data(const ControlAffineSystem& sys, const Box& box, int d,
                      Domain domain, double dt, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("generate_data: d >= 1 required");
  if (box.dim() != sys.state_dim())
    throw std::invalid_argument("generate_data: box dimension mismatch");
  if (domain == Domain::Discrete && !(dt > 0.0))
    throw std::invalid_argument("generate_data: discrete mode needs dt > 0");

  const int n = sys.state_dim();
  const int m = sys.input_dim();
  Dataset data;
  data.domain = domain;
  data.dt = domain == Domain::Discrete ? dt : 0.0;
  data.box = box;
  data.seed = seed;
  data.d = d;

  const SimConfig flow_cfg =
      domain == Domain::Discrete ? SimConfig::for_sampling(dt, dt) : SimConfig{};

  for (int b = 0; b <= m; ++b) {
    DataBlock blk;
    blk.input_label = Eigen::VectorXd::Zero(m);
    if (b > 0) blk.input_label[b - 1] = 1.0;
    blk.xs.resize(n, d);
    blk.ys.resize(n, d);
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd x(n), y;
      std::uint64_t attempt = 0;
      for (;;) {
        for (int i = 0; i < n; ++i)
          x[i] = uniform_sample(seed, b, static_cast<std::uint64_t>(j) + attempt * 1000003ULL,
                                i, box.lo[i], box.hi[i]);
        if (domain == Domain::Continuous) {
          y = sys.rhs(x, blk.input_label);
          break;
        }
        const Trajectory tr =
            integrate(sys, x, [&](double) { return blk.input_label; }, flow_cfg);
        if (!tr.diverged) {
          y = tr.back_state();
          break;
        }
        ++attempt;
        ++data.redraws;
        if (attempt > 64)
          throw std::runtime_error("generate_data: persistent divergence in block " +
                                   std::to_string(b));
      }
      blk.xs.col(j) = x;
      blk.ys.col(j) = y;
    }
    data.blocks.push_back(std::move(blk));
  }
  return data;
}

LiftedData build_matrices(const ObservableDictionary& dict, const Dataset& data) {
  if (data.blocks.empty()) throw std::invalid_argument("build_matrices: empty dataset");
  if (dict.state_dim() != data.blocks[0].xs.rows())
    throw std::invalid_argument("build_matrices: dictionary/data dimension mismatch");
  const int N = dict.lifted_dim();
  const int d = data.d;

  LiftedData out;
  out.X0.resize(N, d);
  for (int j = 0; j < d; ++j) out.X0.col(j) = dict.lift(data.blocks[0].xs.col(j));

  for (size_t b = 1; b < data.blocks.size(); ++b) {
    Eigen::MatrixXd Xe(N + 1, d);
    Xe.row(0).setOnes();  // the explicit constant observable
    for (int j = 0; j < d; ++j)
      Xe.col(j).tail(N) = dict.lift(data.blocks[b].xs.col(j));
    out.Xei.push_back(std::move(Xe));
  }

  for (const auto& blk : data.blocks) {
    Eigen::MatrixXd Y(N, d);
    for (int j = 0; j < d; ++j) {
      if (data.domain == Domain::Continuous) {
        Y.col(j) = dict.jacobian(blk.xs.col(j)) * blk.ys.col(j);
      } else {
        Y.col(j) = dict.lift(blk.ys.col(j));
      }
    }
    out.Yu.push_back(std::move(Y));
  }
  return out;
}

DictionaryReport validate_dictionary(ObservableDictionary& dict, const Box& box,
                                     int grid_density) {
  if (dict.state_dim() != box.dim())
    throw std::invalid_argument("validate_dictionary: box dimension mismatch");
  // full grid for n <= 2; coordinate planes through the origin otherwise
  DictionaryReport rep;
  double max_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  const int n = dict.state_dim();
  const auto probe = [&](const Eigen::VectorXd& x) {
    const double nx = x.norm();
    if (nx == 0.0) return;
    const double r = dict.lift(x).norm() / nx;
    max_ratio = std::max(max_ratio, r);
    min_ratio = std::min(min_ratio, r);
  };
  if (n == 1) {
    for (int i = 0; i < grid_density; ++i) {
      const double t = static_cast<double>(i) / (grid_density - 1);
      Eigen::VectorXd x(1);
      x[0] = box.lo[0] + t * (box.hi[0] - box.lo[0]);
      probe(x);
    }
  } else if (n == 2) {
    for (int i = 0; i < grid_density; ++i)
      for (int j = 0; j < grid_density; ++j) {
        Eigen::VectorXd x(2);
        x[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (grid_density - 1);
        x[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (grid_density - 1);
        probe(x);
      }
  } else {
    // axis planes: vary two coordinates at a time
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        for (int i = 0; i < grid_density; ++i)
          for (int j = 0; j < grid_density; ++j) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
            x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * i / (grid_density - 1);
            x[b] = box.lo[b] + (box.hi[b] - box.lo[b]) * j / (grid_density - 1);
            probe(x);
          }
  }
  rep.L_phi = max_ratio * 1.05;
  rep.worst_ratio = min_ratio;
  rep.lower_bound_ok = min_ratio >= 1.0 - 1e-12;
  dict.set_lipschitz_estimate(rep.L_phi);
  return rep;
}

void Dataset::save(const std::string& dir, const std::string& stem) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int n = blocks.empty() ? 0 : static_cast<int>(blocks[0].xs.rows());
  json manifest;
  manifest["domain"] = domain == Domain::Continuous ? "continuous" : "discrete";
  manifest["dt"] = dt;
  manifest["seed"] = seed;
  manifest["d"] = d;
  manifest["redraws"] = redraws;
  manifest["box"]["lo"] = std::vector<double>(box.lo.data(), box.lo.data() + box.lo.size());
  manifest["box"]["hi"] = std::vector<double>(box.hi.data(), box.hi.data() + box.hi.size());
  manifest["blocks"] = json::array();
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string file = stem + "_block" + std::to_string(b) + ".csv";
    json jb;
    jb["file"] = file;
    jb["input"] = std::vector<double>(blocks[b].input_label.data(),
                                      blocks[b].input_label.data() +
                                          blocks[b].input_label.size());
    manifest["blocks"].push_back(jb);
    std::ofstream os(fs::path(dir) / file);
    if (!os) throw std::runtime_error("cannot write dataset block CSV");
    for (int i = 1; i <= n; ++i) os << (i > 1 ? "," : "") << "x" << i;
    for (int i = 1; i <= n; ++i) os << ",y" << i;
    os << "\n";
    os.precision(17);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < n; ++i) os << (i > 0 ? "," : "") << blocks[b].xs(i, j);
      for (int i = 0; i < n; ++i) os << "," << blocks[b].ys(i, j);
      os << "\n";
    }
  }
  std::ofstream ms(fs::path(dir) / (stem + "_manifest.json"));
  ms << manifest.dump(2) << "\n";
}

Dataset Dataset::load(const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  std::ifstream ms(fs::path(dir) / (stem + "_manifest.json"));
  if (!ms) throw std::runtime_error("cannot open dataset manifest in " + dir);
  json manifest;
  ms >> manifest;
  Dataset data;
  data.domain = manifest.at("domain") == "continuous" ? Domain::Continuous
                                                      : Domain::Discrete;
  data.dt = manifest.at("dt");
  data.seed = manifest.at("seed");
  data.d = manifest.at("d");
  data.redraws = manifest.value("redraws", 0);
  const auto lo = manifest.at("box").at("lo").get<std::vector<double>>();
  const auto hi = manifest.at("box").at("hi").get<std::vector<double>>();
  data.box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  data.box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
  for (const auto& jb : manifest.at("blocks")) {
    DataBlock blk;
    const auto in = jb.at("input").get<std::vector<double>>();
    blk.input_label = Eigen::Map<const Eigen::VectorXd>(in.data(), in.size());
    std::ifstream is(fs::path(dir) / jb.at("file").get<std::string>());
    if (!is) throw std::runtime_error("cannot open dataset block CSV");
    std::string header;
    std::getline(is, header);
    const int n = static_cast<int>(std::count(header.begin(), header.end(), ',') + 1) / 2;
    blk.xs.resize(n, data.d);
    blk.ys.resize(n, data.d);
    for (int j = 0; j < data.d; ++j) {
      std::string line;
      if (!std::getline(is, line))
        throw std::runtime_error("dataset block CSV truncated");
      std::stringstream ss(line);
      std::string cell;
      for (int i = 0; i < 2 * n; ++i) {
        if (!std::getline(ss, cell, ','))
          throw std::runtime_error("dataset block CSV malformed");
        const double v = std::stod(cell);
        if (i < n) blk.xs(i, j) = v;
        else blk.ys(i - n, j) = v;
      }
    }
    data.blocks.push_back(std::move(blk));
  }
  return data;
}

}  // namespace koopcert
