#pragma once

// Posterior model weights, mixture predictive draws, BMA moments and the
// posterior mean squared error (PMSE) diagnostics.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bma/prob.hpp"

namespace bma {

struct WeightedEnsemble {
  std::vector<std::string> names;
  Eigen::VectorXd prior_weights;
  Eigen::VectorXd log_evidences;
  Eigen::VectorXd corrective_log_factors;  // zeros for classical BMA
  Eigen::VectorXd posterior_weights;

  [[nodiscard]] Eigen::Index size() const { return posterior_weights.size(); }
};

/// normalize(ln prior + log_ev + corrections). Prior must sum to 1.
WeightedEnsemble posterior_model_weights(const Eigen::VectorXd& prior, const Eigen::VectorXd& log_ev,
                                         const Eigen::VectorXd& corrections, std::vector<std::string> names = {});

/// Draws from sum_k w_k p_k: each output row picks model k with probability
/// w_k, then a uniformly chosen row of that model's draw matrix.
/// `labels`, if given, receives the chosen model per output row.
Eigen::MatrixXd bma_mixture_draws(const Eigen::VectorXd& weights, const std::vector<Eigen::MatrixXd>& per_model,
                                  Eigen::Index n_out, Rng& rng, std::vector<Eigen::Index>* labels = nullptr);
Eigen::VectorXd bma_mixture_draws(const Eigen::VectorXd& weights, const std::vector<Eigen::VectorXd>& per_model,
                                  Eigen::Index n_out, Rng& rng, std::vector<Eigen::Index>* labels = nullptr);

template <typename D1, typename D2>
double bma_mean(const Eigen::MatrixBase<D1>& weights, const Eigen::MatrixBase<D2>& means) {
  if (weights.size() != means.size()) throw UsageError("bma_mean: length mismatch");
  return weights.dot(means);
}

struct BmaVariance {
  double within = 0.0;   // sum_k w_k v_k
  double between = 0.0;  // sum_k w_k (m_k - m)^2
  [[nodiscard]] double total() const { return within + between; }
};

template <typename D1, typename D2, typename D3>
BmaVariance bma_variance(const Eigen::MatrixBase<D1>& weights, const Eigen::MatrixBase<D2>& means,
                         const Eigen::MatrixBase<D3>& vars) {
  if (weights.size() != means.size() || weights.size() != vars.size()) {
    throw UsageError("bma_variance: length mismatch");
  }
  if ((vars.array() < 0.0).any()) throw UsageError("bma_variance: negative variance");
  const double m = bma_mean(weights, means);
  return {weights.dot(vars), weights.dot((means.array() - m).square().matrix())};
}

/// A quantity estimated as a mean over mixture draws, with its MC error.
struct McValue {
  double value = 0.0;
  double standard_error = 0.0;
};

struct LambdaEntry {
  Eigen::VectorXd lambda;
  double pmse = 0.0;
  /// [(l1 - p1) y1 + (l2 - p2) y2]^2; two models only.
  std::optional<double> gap;
  /// PMSE(lambda) - PMSE(BMA) - gap, estimated draw-by-draw.
  std::optional<McValue> identity_residual;
};

struct PmseReport {
  Eigen::VectorXd weights;
  Eigen::VectorXd model_means;  // posterior mean of y* under each model
  double bma_mean = 0.0;
  Eigen::VectorXd model_pmse;
  McValue bma_pmse;
  std::vector<LambdaEntry> lambdas;

  // Two-model diagnostics.
  std::optional<McValue> dual_first;   // PMSE(y1) - p2^2 (y1 - y2)^2 - PMSE(BMA)
  std::optional<McValue> dual_second;  // PMSE(y2) - p1^2 (y1 - y2)^2 - PMSE(BMA)
  std::optional<double> decomposition_first;     // (p1 - p1^2) PMSE(y1)
  std::optional<double> decomposition_second;    // (p2 - p2^2) PMSE(y2)
  std::optional<double> decomposition_coupling;  // (p1^2 + p2^2) E[(y1 - y*)(y* - y2)]
  std::optional<McValue> decomposition_residual; // PMSE(BMA) - right side
  std::optional<double> grid_argmin;             // lambda_1 minimizing PMSE on the grid
  std::optional<double> r2_two_model;

  /// 1 - PMSE(BMA) / min_k PMSE(y_k), posterior version.
  double r2_bma = 0.0;
  Eigen::Index best_model = 0;
  bool best_model_tie = false;
};

/// PMSE suite for one scalar y*. `mixture` are draws of y* from the BMA
/// mixture and `labels` the model each came from; per-model posterior means are
/// the conditional means of the labelled draws (falling back to `fallback_means`
/// for models that drew no rows). `lambda_grid` rows are weight vectors.
PmseReport pmse_report(const Eigen::VectorXd& weights, const Eigen::VectorXd& mixture,
                       const std::vector<Eigen::Index>& labels, const Eigen::VectorXd& fallback_means,
                       const Eigen::MatrixXd& lambda_grid, double argmin_step = 0.01);

/// Convenience: draws the mixture from per-model predictive draws first.
PmseReport pmse_report(const WeightedEnsemble& ensemble, const std::vector<Eigen::VectorXd>& per_model,
                       const Eigen::MatrixXd& lambda_grid, Eigen::Index n_mixture, RngHandle rng);

nlohmann::json to_json(const WeightedEnsemble& e);
nlohmann::json to_json(const PmseReport& r);

}  // namespace bma
