#include "koopcert/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace koopcert {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

Box box_from_json(const json& j) {
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw std::invalid_argument("config: box lo/hi sizes");
  Box b;
  b.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  b.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
  for (int i = 0; i < b.dim(); ++i)
    if (!(b.lo[i] < b.hi[i])) throw std::invalid_argument("config: empty box");
  return b;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  reject_unknown(j, {"system", "dictionary", "box", "d", "dt", "seed", "domain",
                     "error_constants", "fit", "alpha", "beta", "u_den",
                     "gamma_curve_c", "solver", "threads", "output_dir"},
                 "top level");
  if (j.contains("system")) {
    const auto& js = j["system"];
    reject_unknown(js, {"name", "rho", "lambda", "f", "g"}, "system");
    cfg.system_name = js.value("name", cfg.system_name);
    cfg.sys_rho = js.value("rho", cfg.sys_rho);
    cfg.sys_lambda = js.value("lambda", cfg.sys_lambda);
    if (js.contains("f")) cfg.system_f = js["f"].get<std::vector<std::string>>();
    if (js.contains("g"))
      cfg.system_g = js["g"].get<std::vector<std::vector<std::string>>>();
  }
  if (j.contains("dictionary")) {
    const auto& jd = j["dictionary"];
    reject_unknown(jd, {"name", "components"}, "dictionary");
    cfg.dictionary_name = jd.value("name", cfg.dictionary_name);
    if (jd.contains("components"))
      cfg.dictionary_components = jd["components"].get<std::vector<std::string>>();
  }
  if (j.contains("box")) cfg.box = box_from_json(j["box"]);
  cfg.d = j.value("d", cfg.d);
  if (cfg.d < 1) throw std::invalid_argument("config: d must be >= 1");
  cfg.dt = j.value("dt", cfg.dt);
  if (!(cfg.dt > 0)) throw std::invalid_argument("config: dt must be > 0");
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("domain")) {
    const std::string dom = j["domain"];
    if (dom == "continuous") cfg.domain = Domain::Continuous;
    else if (dom == "discrete") cfg.domain = Domain::Discrete;
    else throw std::invalid_argument("config: domain must be continuous|discrete");
  }
  if (j.contains("error_constants")) {
    const auto& je = j["error_constants"];
    if (je.is_string() && je == "fit") {
      cfg.fit_constants = true;
    } else if (je.is_array() && je.size() == 2) {
      cfg.fit_constants = false;
      cfg.c_x = je[0];
      cfg.c_u = je[1];
      if (!(cfg.c_x > 0) || !(cfg.c_u > 0))
        throw std::invalid_argument("config: error constants must be positive");
    } else {
      throw std::invalid_argument("config: error_constants is \"fit\" or [cx, cu]");
    }
  }
  if (j.contains("fit")) {
    const auto& jf = j["fit"];
    reject_unknown(jf, {"margin", "kappa", "samples"}, "fit");
    cfg.fit_margin = jf.value("margin", cfg.fit_margin);
    cfg.fit_kappa = jf.value("kappa", cfg.fit_kappa);
    cfg.fit_samples = jf.value("samples", cfg.fit_samples);
  }
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.beta = j.value("beta", cfg.beta);
  if (cfg.alpha < 1 || cfg.beta < 0)
    throw std::invalid_argument("config: alpha >= 1, beta >= 0 required");
  cfg.u_den_text = j.value("u_den", cfg.u_den_text);
  if (j.contains("gamma_curve_c"))
    cfg.gamma_curve_c = j["gamma_curve_c"].get<std::vector<double>>();
  if (j.contains("solver")) {
    const auto& js = j["solver"];
    reject_unknown(js, {"tol_primal", "tol_dual", "tol_gap", "max_iters"}, "solver");
    cfg.solver.tol_primal = js.value("tol_primal", cfg.solver.tol_primal);
    cfg.solver.tol_dual = js.value("tol_dual", cfg.solver.tol_dual);
    cfg.solver.tol_gap = js.value("tol_gap", cfg.solver.tol_gap);
    cfg.solver.max_iters = js.value("max_iters", cfg.solver.max_iters);
  }
  cfg.threads = j.value("threads", cfg.threads);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (const char* root = std::getenv("KOOPCERT_OUT"))
    cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  json j;
  j["system"] = {{"name", system_name}, {"rho", sys_rho}, {"lambda", sys_lambda}};
  if (!system_f.empty()) j["system"]["f"] = system_f;
  if (!system_g.empty()) j["system"]["g"] = system_g;
  j["dictionary"] = {{"name", dictionary_name}};
  if (!dictionary_components.empty())
    j["dictionary"]["components"] = dictionary_components;
  j["box"] = {{"lo", std::vector<double>(box.lo.data(), box.lo.data() + box.dim())},
              {"hi", std::vector<double>(box.hi.data(), box.hi.data() + box.dim())}};
  j["d"] = d;
  j["dt"] = dt;
  j["seed"] = seed;
  j["domain"] = domain == Domain::Continuous ? "continuous" : "discrete";
  if (fit_constants) j["error_constants"] = "fit";
  else j["error_constants"] = {c_x, c_u};
  j["fit"] = {{"margin", fit_margin}, {"kappa", fit_kappa}, {"samples", fit_samples}};
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["u_den"] = u_den_text;
  j["gamma_curve_c"] = gamma_curve_c;
  j["solver"] = {{"tol_primal", solver.tol_primal},
                 {"tol_dual", solver.tol_dual},
                 {"tol_gap", solver.tol_gap},
                 {"max_iters", solver.max_iters}};
  j["threads"] = threads;
  j["output_dir"] = output_dir;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config to " + path);
  os << j.dump(2) << "\n";
}

ControlAffineSystem ExperimentConfig::make_system() const {
  if (!system_f.empty()) {
    const int n = static_cast<int>(system_f.size());
    std::vector<Polynomial> f;
    for (const auto& s : system_f) f.push_back(Polynomial::parse(s, n));
    std::vector<std::vector<Polynomial>> g;
    for (const auto& gi : system_g) {
      std::vector<Polynomial> field;
      for (const auto& s : gi) field.push_back(Polynomial::parse(s, n));
      g.push_back(std::move(field));
    }
    return ControlAffineSystem(std::move(f), std::move(g));
  }
  if (system_name == "slow_manifold")
    return ControlAffineSystem::slow_manifold(sys_rho, sys_lambda);
  throw std::invalid_argument("config: unknown system '" + system_name + "'");
}

ObservableDictionary ExperimentConfig::make_dictionary() const {
  if (!dictionary_components.empty()) {
    const int n = box.dim();
    std::vector<Polynomial> comps;
    for (const auto& s : dictionary_components)
      comps.push_back(Polynomial::parse(s, n));
    return ObservableDictionary(n, std::move(comps));
  }
  if (dictionary_name == "slow_manifold")
    return ObservableDictionary::slow_manifold(sys_rho, sys_lambda);
  if (dictionary_name == "identity") return ObservableDictionary::identity(box.dim());
  throw std::invalid_argument("config: unknown dictionary '" + dictionary_name + "'");
}

Polynomial ExperimentConfig::make_u_den(int N) const {
  if (!u_den_text.empty()) return Polynomial::parse(u_den_text, N);
  Polynomial p = Polynomial::constant(N, 1.0);
  for (int i = 0; i < N; ++i)
    p += Polynomial::variable(N, i) * Polynomial::variable(N, i);
  return p;
}

SynthesisOptions ExperimentConfig::make_synthesis_options() const {
  SynthesisOptions opts;
  opts.alpha = alpha;
  opts.beta = beta;
  opts.sdp = solver;
  return opts;
}

PerformanceSpec ExperimentConfig::make_performance_spec(int N) const {
  const int n = box.dim();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, N);
  C.leftCols(n).setIdentity();
  return PerformanceSpec::l2_gain(Eigen::MatrixXd::Identity(n, n), C, 1, N, 1.0);
}

namespace {

struct Stage {
  ExperimentConfig cfg;
  fs::path dir;

  explicit Stage(const ExperimentConfig& c) : cfg(c), dir(c.output_dir) {
    fs::create_directories(dir);
    cfg.save((dir / "effective_config.json").string());
  }

  Dataset dataset() const { return Dataset::load(dir.string()); }
  SurrogateModel surrogate() const {
    return SurrogateModel::load((dir / "surrogate.json").string());
  }
};

}  // namespace

int cmd_generate_data(const ExperimentConfig& cfg) {
  Stage st(cfg);
  const ControlAffineSystem sys = cfg.make_system();
  const Dataset data =
      generate_data(sys, cfg.box, cfg.d, cfg.domain, cfg.dt, cfg.seed);
  data.save(st.dir.string());
  std::cout << "dataset: " << data.blocks.size() << " blocks x " << data.d
            << " samples -> " << st.dir << "\n";
  return kOk;
}

int cmd_fit(const ExperimentConfig& cfg) {
  Stage st(cfg);
  const ControlAffineSystem sys = cfg.make_system();
  ObservableDictionary dict = cfg.make_dictionary();
  validate_dictionary(dict, cfg.box);
  const Dataset data = st.dataset();
  SurrogateModel model = fit(data, dict);
  if (cfg.fit_constants) {
    ValidationSpec vs;
    vs.samples = cfg.fit_samples;
    vs.kappa = cfg.fit_kappa;
    vs.margin = cfg.fit_margin;
    vs.seed = cfg.seed + 7919;
    const ErrorBoundFit fitres = fit_error_constants(model, sys, cfg.box, vs);
    std::cout << "fitted c_x = " << fitres.c_x << ", c_u = " << fitres.c_u << "\n";
  } else {
    model.c_x = cfg.c_x;
    model.c_u = cfg.c_u;
    std::cout << "error constants overridden: c_x = " << model.c_x
              << ", c_u = " << model.c_u << "\n";
  }
  model.save((st.dir / "surrogate.json").string());
  return kOk;
}

int cmd_synthesize(const ExperimentConfig& cfg, const std::string& mode) {
  Stage st(cfg);
  const ControlAffineSystem sys = cfg.make_system();
  SurrogateModel model = st.surrogate();
  const SynthesisOptions opts = cfg.make_synthesis_options();

  SynthesisResult result;
  if (mode == "ct") {
    result = synthesize_ct(model, cfg.box, opts);
  } else if (mode == "dt") {
    if (model.domain != Domain::Discrete) {
      std::cerr << "synthesize --mode dt needs a discrete surrogate (re-run "
                   "generate-data/fit with domain=discrete)\n";
      return kConfigError;
    }
    result = synthesize_dt(model, cfg.make_u_den(model.lifted_dim()), cfg.box, opts);
  } else if (mode == "perf") {
    const PerformanceResult pres = synthesize_perf(
        model, cfg.make_performance_spec(model.lifted_dim()), cfg.box, opts);
    if (!pres.base.feasible) {
      std::cerr << "performance synthesis infeasible over the whole gamma bracket\n";
      return kInfeasible;
    }
    result = pres.base;
    std::cout << "gamma = " << pres.gamma
              << " (lambda* = " << pres.lambda_star
              << ", disturbance budget nu = " << pres.disturbance_budget << ")\n";
    nlohmann::json jg;
    jg["gamma"] = pres.gamma;
    jg["lambda_star"] = pres.lambda_star;
    jg["eta"] = pres.eta;
    jg["nu"] = pres.disturbance_budget;
    std::ofstream os(st.dir / "performance.json");
    os << jg.dump(2) << "\n";
  } else {
    std::cerr << "unknown mode '" << mode << "' (ct|dt|perf)\n";
    return kConfigError;
  }

  if (!result.feasible) {
    std::cerr << "synthesis infeasible at c_x=" << model.c_x << " c_u=" << model.c_u
              << " alpha=" << cfg.alpha << " beta=" << cfg.beta << " ("
              << sdp::to_string(result.sdp_result.status) << ")\n";
    return kInfeasible;
  }
  result.controller.save((st.dir / "controller.json").string());
  result.roa.save((st.dir / "roa.json").string());
  sdp::export_interchange(result.compiled.problem,
                          (st.dir / ("synthesis_" + mode + ".dat-s")).string());
  result.sdp_result.save_json((st.dir / "sdp_result.json").string());

  const VerificationReport rep = verify_synthesis(result, model, sys, cfg.box);
  rep.save((st.dir / "verification.json").string());
  std::cout << "rho = " << result.rho << ", c* = " << result.roa.c_star
            << ", certificate " << (result.certificate.pass ? "PASS" : "FAIL")
            << ", verification " << (rep.pass() ? "PASS" : "FAIL") << "\n";
  if (!result.certificate.pass || !rep.pass()) return kSoundnessFailure;
  return kOk;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
  Stage st(cfg);
  const ControlAffineSystem sys = cfg.make_system();
  const SurrogateModel model = st.surrogate();
  const Controller ctrl = Controller::load((st.dir / "controller.json").string());
  const RoaCertificate roa = [&] {
    RoaCertificate r = compute_roa(model.dict, ctrl.P, cfg.box);
    return r;
  }();

  const RoaMap map = roa_map(ctrl, roa, model.dict, sys, cfg.box);
  map.write_contour_csv((st.dir / "roa_contour.csv").string());
  map.write_grid_csv((st.dir / "roa_grid.csv").string());

  Eigen::VectorXd x0 = roa.minimizer * 0.9;
  const LyapunovTrace trace = lyapunov_trace(sys, ctrl, model.dict, x0, 10.0);
  trace.write_csv((st.dir / "lyap_trace.csv").string());

  int converged = 0, inside = 0;
  for (const auto& gp : map.grid) {
    if (gp.inside) {
      ++inside;
      if (gp.converged) ++converged;
    }
  }
  nlohmann::json rep;
  rep["scenario"] = "evaluate";
  rep["inputs"] = {{"seed", cfg.seed}, {"d", cfg.d}, {"dt", cfg.dt},
                   {"c_x", model.c_x}, {"c_u", model.c_u},
                   {"alpha", cfg.alpha}, {"beta", cfg.beta}};
  rep["outputs"] = {{"c_star", roa.c_star},
                    {"grid_inside", inside},
                    {"grid_converged", converged},
                    {"degenerate", map.degenerate}};
  rep["files"] = {"roa_contour.csv", "roa_grid.csv", "lyap_trace.csv"};
  std::ofstream os(st.dir / "report.json");
  os << rep.dump(2) << "\n";
  std::cout << "converged " << converged << "/" << inside
            << " interior grid starts; c* = " << roa.c_star << "\n";
  if (inside > 0 && converged < inside) return kSoundnessFailure;
  return kOk;
}

int cmd_reproduce_fig1(const ExperimentConfig& cfg) {
  // full pipeline at the shipped defaults: data -> fit -> ct synthesis -> map
  int rc = cmd_generate_data(cfg);
  if (rc) return rc;
  rc = cmd_fit(cfg);
  if (rc) return rc;
  ExperimentConfig ct = cfg;
  if (ct.fit_constants) {
    // the headline experiment pins the error level of the reference setup
    ct.fit_constants = false;
    ct.c_x = 0.1;
    ct.c_u = 0.1;
    Stage st(ct);
    SurrogateModel model = st.surrogate();
    model.c_x = ct.c_x;
    model.c_u = ct.c_u;
    model.save((st.dir / "surrogate.json").string());
  }
  rc = cmd_synthesize(ct, "ct");
  if (rc) return rc;
  return cmd_evaluate(ct);
}

int cmd_reproduce_fig2(const ExperimentConfig& cfg) {
  Stage st(cfg);
  const ControlAffineSystem sys = cfg.make_system();
  (void)sys;
  SurrogateModel model = st.surrogate();
  const SynthesisOptions opts = cfg.make_synthesis_options();
  const PerformanceSpec spec = cfg.make_performance_spec(model.lifted_dim());

  std::vector<GammaCurvePoint> curve(cfg.gamma_curve_c.size());
  parallel_for(static_cast<int>(cfg.gamma_curve_c.size()), cfg.threads, [&](int i) {
    SurrogateModel m = model;
    m.c_x = cfg.gamma_curve_c[i];
    m.c_u = cfg.gamma_curve_c[i];
    GammaCurvePoint pt;
    pt.c = cfg.gamma_curve_c[i];
    try {
      const PerformanceResult res = synthesize_perf(m, spec, cfg.box, opts);
      pt.feasible = res.base.feasible && std::isfinite(res.gamma);
      pt.gamma = res.gamma;
    } catch (const std::exception&) {
      pt.feasible = false;
      pt.gamma = std::numeric_limits<double>::infinity();
    }
    curve[i] = pt;
  });
  write_gamma_csv(curve, (st.dir / "gamma_curve.csv").string());
  int feas = 0;
  for (const auto& pt : curve)
    if (pt.feasible) ++feas;
  std::cout << "gamma curve: " << feas << "/" << curve.size()
            << " feasible points -> gamma_curve.csv\n";
  return feas > 0 ? kOk : kInfeasible;
}

}  // namespace koopcert
