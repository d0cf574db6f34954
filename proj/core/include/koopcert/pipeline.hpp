#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "koopcert/evaluation.hpp"

namespace koopcert {

/// Validated experiment configuration; unknown JSON keys are rejected and all
/// defaults are recorded back into the persisted effective config.
struct ExperimentConfig {
  // plant
  std::string system_name = "slow_manifold";
  double sys_rho = -2.0;
  double sys_lambda = 1.0;
  std::vector<std::string> system_f;               ///< custom drift (overrides name)
  std::vector<std::vector<std::string>> system_g;  ///< custom input maps

  // dictionary
  std::string dictionary_name = "slow_manifold";
  std::vector<std::string> dictionary_components;  ///< custom (overrides name)

  Box box = Box::centered(2, 1.0);
  int d = 200;
  double dt = 0.01;
  std::uint64_t seed = 1;
  Domain domain = Domain::Continuous;

  bool fit_constants = true;  ///< "fit", else the explicit override below
  double c_x = 0.1, c_u = 0.1;
  double fit_margin = 1.2;
  double fit_kappa = 1.0;
  int fit_samples = 4096;

  int alpha = 1, beta = 1;
  std::string u_den_text;  ///< empty = 1 + z'z
  std::vector<double> gamma_curve_c = {1,    0.7,  0.6,   0.5,    0.4,  0.3, 0.2,
                                       0.1,  0.05, 0.01,  0.005,  0.001,
                                       0.0005, 0.0001};

  sdp::SolveOptions solver;
  int threads = 0;  ///< 0 = hardware concurrency
  std::string output_dir = "out";

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  void save(const std::string& path) const;  ///< effective config with defaults

  ControlAffineSystem make_system() const;
  ObservableDictionary make_dictionary() const;
  Polynomial make_u_den(int N) const;
  SynthesisOptions make_synthesis_options() const;
  PerformanceSpec make_performance_spec(int N) const;
};

/// Deterministic slot-wise parallel map: fn(i) runs for i in [0, n) on up to
/// `threads` workers; each index owns its output slot.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Exit codes shared by the CLI: 0 ok, 2 config error, 3 infeasible
/// synthesis, 4 soundness-check failure.
enum ExitCode {
  kOk = 0,
  kConfigError = 2,
  kInfeasible = 3,
  kSoundnessFailure = 4,
};

int cmd_generate_data(const ExperimentConfig& cfg);
int cmd_fit(const ExperimentConfig& cfg);
int cmd_synthesize(const ExperimentConfig& cfg, const std::string& mode);
int cmd_evaluate(const ExperimentConfig& cfg);
int cmd_reproduce_fig1(const ExperimentConfig& cfg);
int cmd_reproduce_fig2(const ExperimentConfig& cfg);

}  // namespace koopcert
