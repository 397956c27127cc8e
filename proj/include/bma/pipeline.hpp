#pragma once

// Generic config-driven run: models and data described in JSON/CSV, taken
// through calibrate -> evidence -> weights -> predict -> diagnose.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bma/experiments.hpp"

namespace bma {

enum class PipelineStage { Calibrate, Evidence, Weights, Predict, Diagnose };
std::string to_string(PipelineStage s);

/// Builds model specs from the `models` array. `datasets` are searched for
/// point locations when a model is given as a table of runs keyed by id.
std::vector<ModelSpec> models_from_json(const nlohmann::json& models, const std::vector<const Dataset*>& datasets,
                                        const std::filesystem::path& base_dir);

struct PipelineResult {
  std::vector<ModelSpec> specs;
  Dataset train, query;
  bool has_test = false;
  WeightedEnsemble ensemble;
  Eigen::VectorXd log_evidence_se;
  nlohmann::json summary;
  OutputBundle outputs;
};

/// Stops after `last`; later stages' files are not produced.
PipelineResult run_pipeline(const ExperimentConfig& config, PipelineStage last = PipelineStage::Diagnose);

/// Adds manifest.json covering every file already in the bundle.
void finalize_outputs(OutputBundle& outputs, const ExperimentConfig& config, const std::string& command);

}  // namespace bma
