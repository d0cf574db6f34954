// Command-line front end for the full pipeline: data generation, surrogate
// fitting, controller synthesis, and closed-loop evaluation, with persisted
// artifacts between stages.

#include <CLI11.hpp>
#include <iostream>

#include "koopcert/pipeline.hpp"

using namespace koopcert;

int main(int argc, char** argv) {
  CLI::App app{"certified Koopman surrogate learning and SOS controller synthesis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode = "ct";
  std::string domain_flag, error_flag;
  double dt_flag = -1.0;
  std::int64_t d_flag = -1, seed_flag = -1;
  std::string out_flag;
  int threads_flag = -1;
  double c_flag = -1.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON");
    sub->add_option("--domain", domain_flag, "continuous|discrete");
    sub->add_option("--dt", dt_flag, "sampling period");
    sub->add_option("--d", d_flag, "samples per input block");
    sub->add_option("--seed", seed_flag, "RNG seed");
    sub->add_option("--out", out_flag, "output directory");
    sub->add_option("--threads", threads_flag, "worker threads (0 = all cores)");
  };

  CLI::App* gen = app.add_subcommand("generate-data", "draw the (m+1)-block dataset");
  add_common(gen);

  CLI::App* fit_cmd = app.add_subcommand("fit", "regress the bilinear surrogate");
  add_common(fit_cmd);
  std::vector<double> cc;
  fit_cmd->add_option("--error-constants", cc,
                      "override c_x c_u instead of fitting")
      ->expected(2);

  CLI::App* syn = app.add_subcommand("synthesize", "solve an SOS synthesis program");
  add_common(syn);
  syn->add_option("--mode", mode, "ct|dt|perf")->required();
  syn->add_option("--c", c_flag, "error-constant level c_x = c_u");

  CLI::App* ev = app.add_subcommand("evaluate", "closed-loop evaluation bundle");
  add_common(ev);

  CLI::App* fig1 = app.add_subcommand("reproduce-fig1",
                                      "end-to-end region-of-attraction study");
  add_common(fig1);

  CLI::App* fig2 = app.add_subcommand("reproduce-fig2",
                                      "L2-gain bound versus error-constant curve");
  add_common(fig2);

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = ExperimentConfig::from_json_file(config_path);
    if (!domain_flag.empty()) {
      if (domain_flag == "continuous") cfg.domain = Domain::Continuous;
      else if (domain_flag == "discrete") cfg.domain = Domain::Discrete;
      else throw std::invalid_argument("--domain must be continuous|discrete");
    }
    if (dt_flag > 0) cfg.dt = dt_flag;
    if (d_flag >= 0) {
      if (d_flag < 1) throw std::invalid_argument("--d must be >= 1");
      cfg.d = static_cast<int>(d_flag);
    }
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    if (!out_flag.empty()) cfg.output_dir = out_flag;
    if (threads_flag >= 0) cfg.threads = threads_flag;
    if (!cc.empty()) {
      cfg.fit_constants = false;
      cfg.c_x = cc[0];
      cfg.c_u = cc[1];
      if (!(cfg.c_x > 0) || !(cfg.c_u > 0))
        throw std::invalid_argument("--error-constants must be positive");
    }
    if (c_flag > 0) {
      cfg.fit_constants = false;
      cfg.c_x = c_flag;
      cfg.c_u = c_flag;
    }
    if (syn->parsed() && mode == "dt" && cfg.domain != Domain::Discrete)
      throw std::invalid_argument(
          "--mode dt requires domain=discrete (and its dt) in the config");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_generate_data(cfg);
    if (fit_cmd->parsed()) return cmd_fit(cfg);
    if (syn->parsed()) return cmd_synthesize(cfg, mode);
    if (ev->parsed()) return cmd_evaluate(cfg);
    if (fig1->parsed()) return cmd_reproduce_fig1(cfg);
    if (fig2->parsed()) return cmd_reproduce_fig2(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
