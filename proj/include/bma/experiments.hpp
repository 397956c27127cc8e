#pragma once

// Run configuration plus the two built-in experiments: the proton-potential
// mixture (classical BMA) and the quadratic toy with partially overlapping
// domains (domain-corrected BMA).

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bma/diagnostics.hpp"
#include "bma/domain.hpp"
#include "bma/ensemble.hpp"
#include "bma/evidence.hpp"
#include "bma/io.hpp"
#include "bma/mcmc.hpp"
#include "bma/model.hpp"

namespace bma {

enum class WeightMode { Classical, IndependentDomains, DomainCorrected };
std::string to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& s);

struct ExperimentConfig {
  std::string experiment = "proton";  // proton | quadratic | pipeline
  std::uint64_t seed = 12345;
  WeightMode mode = WeightMode::Classical;
  std::string output_dir = "out";

  ChainSettings chain;
  EvidenceMethod evidence_method = EvidenceMethod::PriorMC;
  Eigen::Index evidence_draws = kDefaultEvidenceDraws;

  MixingMode mixing = MixingMode::Prior;
  LocalEstimator correction_estimator = LocalEstimator::EvidenceRatio;
  ChainSettings correction_chain = {100000, 5000, 1, std::nullopt, 0.1, 0.3};
  Eigen::Index correction_prior_draws = 100000;

  Eigen::Index predictive_draws = 10000;

  struct Proton {
    Eigen::Index n = 210;
    Eigen::Index n_train = 140;
    double sigma_prior_scale = 5.0;
  } proton;

  struct Quadratic {
    std::vector<double> d_shared = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double theta_prior_sd = 10.0;
    double noise_sd = 1e-3;          // data-generating scale
    std::optional<double> sigma;     // fixed likelihood sigma; free (half-normal) when unset
    double sigma_prior_scale = 5.0;
    double eval_abs_max = 5.0;       // evaluation points |x| <= eval_abs_max
    std::string surrogate = "exact";  // exact | gp-emulator
  } quadratic;

  /// Model/data section for the generic pipeline, kept as JSON.
  nlohmann::json pipeline = nlohmann::json::object();
  /// Directory relative paths in `pipeline` resolve against (not serialized).
  std::filesystem::path base_dir;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys take defaults; unknown keys and bad values raise ConfigError
/// naming the JSON path.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Parse errors are reported as ConfigError with `file:line:column`.
ExperimentConfig load_config(const std::filesystem::path& path);

// ---- proton -----------------------------------------------------------------

struct ProtonConstants {
  double v_ws = 50.0;
  double v_c = 0.5;
  double a = 0.5;
  double z = 100.0;
  double mass = 250.0;
  [[nodiscard]] double radius() const;  // A^{1/3} 1.25
};

double woods_saxon(double r, const ProtonConstants& c = {});
double coulomb(double r, const ProtonConstants& c = {});

struct ProtonData {
  Dataset all, train, test;
};

/// y = V1/2 + V2/2 + N(0, 1) at r ~ U(R_A, 10); seeded train/test split.
ProtonData gen_proton_data(std::uint64_t seed, Eigen::Index n = 210, Eigen::Index n_train = 140,
                           const ProtonConstants& c = {});

/// M1 = Woods-Saxon, M2 = Coulomb; each with its own noise sigma.
std::vector<ModelSpec> proton_models(double sigma_prior_scale, const ProtonConstants& c = {});

struct ProtonResult {
  WeightedEnsemble ensemble;
  Eigen::VectorXd log_evidence_se;
  Eigen::VectorXd model_rmse;
  double bma_rmse = 0.0;
  Eigen::VectorXd r2;
  std::vector<CoverageCurve> model_ecp;
  CoverageCurve bma_ecp;
  nlohmann::json summary;
  OutputBundle outputs;
};

ProtonResult run_proton_experiment(const ExperimentConfig& config);

// ---- quadratic --------------------------------------------------------------

struct QuadraticScheme {
  double d_shared = 0.0;
  bool symmetric = false;
  int lo[2] = {0, 0};
  int hi[2] = {0, 0};
  DomainMask masks[2];
};

struct QuadraticData {
  Dataset data;  // 18 points at x = -9..-1, 1..9
  std::vector<QuadraticScheme> schemes;
};

/// Mask pairs for D_shared in {0.2, ..., 0.8}; throws ConfigError for others.
QuadraticScheme quadratic_scheme(double d_shared, const Dataset& data);
QuadraticData gen_quadratic_data(std::uint64_t seed, double noise_sd = 1e-3,
                                 const std::vector<double>& d_shared = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});

std::vector<ModelSpec> quadratic_models(const QuadraticScheme& scheme, const ExperimentConfig::Quadratic& q);

struct QuadraticSchemeResult {
  QuadraticScheme scheme;
  Eigen::VectorXd log_evidence, log_evidence_se;
  Eigen::VectorXd log_correction, log_correction_se;
  double log_q0 = 0.0, log_q = 0.0;
  Eigen::VectorXd weights_q0, weights_q;
  Eigen::VectorXd eval_x, eval_y;
  std::vector<PredictiveMoments> model_moments;
  LocalMoments bma_q0, bma_q;
  Eigen::VectorXd model_rmse;
  double rmse_bma_q0 = 0.0, rmse_bma_q = 0.0;
  Eigen::VectorXd r2;  // BMA(Q) against each model
  nlohmann::json correction_ledger;
};

struct QuadraticResult {
  std::vector<QuadraticSchemeResult> schemes;
  nlohmann::json summary;
  OutputBundle outputs;
};

QuadraticResult run_quadratic_experiment(const ExperimentConfig& config);

CorrectionSettings correction_settings(const ExperimentConfig& config, RngHandle evidence_rng);

/// CSV `model,prior_weight,log_evidence,log_evidence_se,log_correction,weight`.
std::string weights_csv(const WeightedEnsemble& e, const Eigen::VectorXd& log_evidence_se);
std::string ecp_csv(const CoverageCurve& c);

}  // namespace bma
