// bma_cli: batch front end for the experiments and the config-driven pipeline.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "bma/errors.hpp"
#include "bma/experiments.hpp"
#include "bma/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "JSON run configuration");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Override the configured seed");
  cmd->add_option("--out", f.out, "Output directory (overrides output_dir)");
  cmd->add_option("--mode", f.mode, "Weighting mode")
      ->check(CLI::IsMember({"classical", "independent-domains", "domain-corrected"}));
}

bma::ExperimentConfig resolve(const CommonFlags& f) {
  bma::ExperimentConfig c = f.config.empty() ? bma::ExperimentConfig{} : bma::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.mode.empty()) c.mode = bma::weight_mode_from_string(f.mode);
  return c;
}

void print_weights(const bma::WeightedEnsemble& e) {
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    std::cout << "  " << e.names[static_cast<std::size_t>(k)] << "  weight " << e.posterior_weights[k]
              << "  log-evidence " << e.log_evidences[k] << "  log-correction " << e.corrective_log_factors[k] << '\n';
  }
}

int run_experiment(const std::string& name, CommonFlags& flags) {
  bma::ExperimentConfig cfg = resolve(flags);
  cfg.experiment = name;
  if (flags.mode.empty() && name == "quadratic") cfg.mode = bma::WeightMode::DomainCorrected;
  bma::OutputBundle out;
  if (name == "proton") {
    auto r = bma::run_proton_experiment(cfg);
    std::cout << "proton experiment, seed " << cfg.seed << '\n';
    print_weights(r.ensemble);
    std::cout << "  RMSE M1 " << r.model_rmse[0] << "  M2 " << r.model_rmse[1] << "  BMA " << r.bma_rmse << '\n';
    out = std::move(r.outputs);
  } else {
    auto r = bma::run_quadratic_experiment(cfg);
    std::cout << "quadratic experiment, seed " << cfg.seed << '\n';
    for (const auto& s : r.schemes) {
      std::cout << "  D_shared " << s.scheme.d_shared << (s.scheme.symmetric ? " (sym)" : " (asym)") << "  Q0 "
                << std::exp(s.log_q0) << "  Q " << std::exp(s.log_q) << "  RMSE BMA(Q0) " << s.rmse_bma_q0
                << "  BMA(Q) " << s.rmse_bma_q << '\n';
    }
    out = std::move(r.outputs);
  }
  bma::finalize_outputs(out, cfg, "experiment " + name);
  out.write(cfg.output_dir);
  std::cout << "wrote " << out.files().size() << " files to " << cfg.output_dir << '\n';
  return 0;
}

int run_stage(bma::PipelineStage stage, const std::string& command, CommonFlags& flags) {
  bma::ExperimentConfig cfg = resolve(flags);
  auto r = bma::run_pipeline(cfg, stage);
  if (stage != bma::PipelineStage::Calibrate && stage != bma::PipelineStage::Evidence) print_weights(r.ensemble);
  bma::finalize_outputs(r.outputs, cfg, command);
  r.outputs.write(cfg.output_dir);
  std::cout << "wrote " << r.outputs.files().size() << " files to " << cfg.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian model averaging for computer models"};
  app.set_version_flag("--version", bma::library_version());
  app.require_subcommand(1);

  CommonFlags flags;
  std::string experiment_name;
  auto* exp = app.add_subcommand("experiment", "Run a built-in experiment");
  exp->add_option("name", experiment_name, "proton | quadratic")->required()->check(CLI::IsMember({"proton", "quadratic"}));
  add_common(exp, flags, false);

  struct StageCmd {
    const char* name;
    const char* help;
    bma::PipelineStage stage;
  };
  const StageCmd stages[] = {
      {"calibrate", "Sample each model's parameter posterior", bma::PipelineStage::Calibrate},
      {"evidence", "Calibrate and estimate model evidences", bma::PipelineStage::Evidence},
      {"weights", "Compute posterior model weights", bma::PipelineStage::Weights},
      {"predict", "Weights plus BMA predictions", bma::PipelineStage::Predict},
      {"diagnose", "Predictions plus RMSE and coverage diagnostics", bma::PipelineStage::Diagnose},
      {"pipeline", "Full run (same as diagnose)", bma::PipelineStage::Diagnose},
  };
  std::vector<std::pair<CLI::App*, const StageCmd*>> stage_cmds;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags, true);
    stage_cmds.emplace_back(cmd, &s);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*exp) return run_experiment(experiment_name, flags);
    for (const auto& [cmd, s] : stage_cmds) {
      if (*cmd) return run_stage(s->stage, s->name, flags);
    }
  } catch (const bma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
