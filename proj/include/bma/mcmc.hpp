#pragma once

// Adaptive random-walk Metropolis-Hastings.

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bma/model.hpp"

namespace bma {

struct ChainSettings {
  Eigen::Index n_samples = 10000;
  Eigen::Index burn_in = 2000;
  Eigen::Index thin = 1;
  /// Starting point; prior mean when unset.
  std::optional<Eigen::VectorXd> initial;
  /// Proposal sd per coordinate of the sampling space at the start of burn-in.
  double initial_scale = 0.1;
  double target_acceptance = 0.3;
};

struct PosteriorSamples {
  Eigen::MatrixXd draws;     // n_samples x dim(phi)
  Eigen::VectorXd log_post;  // log prior + log likelihood in phi space
  Eigen::VectorXd log_lik;
  double acceptance_rate = 0.0;  // after burn-in
  RngHandle seed;
  Eigen::Index burn_in = 0;
  Eigen::Index thin = 1;
  /// Proposal covariance (sampling space) frozen at the end of burn-in.
  Eigen::MatrixXd proposal_cov;

  [[nodiscard]] Eigen::Index size() const { return draws.rows(); }
};

/// Draws from exp(log_prior + log_likelihood(subset)). Positive-support
/// coordinates are walked on the log scale with the Jacobian included.
PosteriorSamples sample_posterior(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                  const ChainSettings& settings, RngHandle rng);

/// One predictive draw per (posterior draw, query row): rows follow `samples`.
Eigen::MatrixXd posterior_predictive(const ModelSpec& spec, const PosteriorSamples& samples, const Dataset& data,
                                     const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable,
                                     RngHandle rng);

/// Predictive mean and total variance (law of total variance over draws).
PredictiveMoments posterior_predictive_moments(const ModelSpec& spec, const PosteriorSamples& samples,
                                               const Dataset& data, const Eigen::MatrixXd& xstar,
                                               const std::vector<std::string>& observable);

/// CSV `draw_index,<name_1>,...,<name_d>,log_post`.
void write_trace_csv(std::ostream& out, const PosteriorSamples& samples, const std::vector<std::string>& names);

}  // namespace bma
