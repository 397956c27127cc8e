#pragma once

// Domain-corrected model averaging for models defined on different subsets
// of the data: equivalence classes, corrective likelihoods p(y^(-k) | y^(k)),
// local mixture prediction and local model selection.

#include <Eigen/Core>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bma/evidence.hpp"
#include "bma/mcmc.hpp"
#include "bma/model.hpp"

namespace bma {

struct DomainPartition {
  std::vector<DomainMask> masks;  // per model
  DomainMask all;                 // union of the masks
  DomainMask common_core;         // intersection of the masks
  bool union_check = false;
  /// Model indices per class. Models with an empty domain constrain nothing
  /// and are listed in every class.
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::string> warnings;

  [[nodiscard]] DomainMask class_data(std::size_t c) const;
};

/// Throws CoverageError if some dataset point is outside every model domain.
DomainPartition build_partition(const std::vector<ModelSpec>& specs, const Dataset& data);

/// Posterior samples of model l conditioned on a subset of its domain,
/// generated on first request and cached. An empty conditioning set yields
/// i.i.d. prior draws. Each (model, subset) pair gets its own random stream.
class PosteriorCache {
 public:
  PosteriorCache(const std::vector<ModelSpec>& specs, const Dataset& data, ChainSettings settings, RngHandle rng,
                 Eigen::Index prior_draws = 10000);

  const PosteriorSamples& get(std::size_t model, const DomainMask& conditioning);
  /// Seeds the cache, e.g. with samples computed elsewhere.
  void put(std::size_t model, const DomainMask& conditioning, PosteriorSamples samples);
  [[nodiscard]] std::size_t size() const { return cache_.size(); }

 private:
  const std::vector<ModelSpec>* specs_;
  const Dataset* data_;
  ChainSettings settings_;
  RngHandle rng_;
  Eigen::Index prior_draws_;
  std::map<std::pair<std::size_t, DomainMask>, std::unique_ptr<PosteriorSamples>> cache_;
};

/// ln p(target | given, M) estimated by averaging over posterior draws of M
/// conditioned on `given`.
LogMeanEstimate predictive_log_density(const ModelSpec& spec, const PosteriorSamples& samples, const Dataset& data,
                                       const DomainMask& target, const DomainMask& given);

/// ln p(y^(-A) | y^(A)) with the missing part predicted by B, whose samples
/// must be conditioned on y^(A) n y^(B). Data is the whole dataset.
LogMeanEstimate corrective_factor_two_models(const ModelSpec& spec_a, const ModelSpec& spec_b, const Dataset& data,
                                             const PosteriorSamples& samples_b);

enum class MixingMode { Prior, Posterior };
std::string to_string(MixingMode m);

/// How ln p(T | C, M_l) is estimated at each recursion node: averaging the
/// likelihood of T over posterior draws given C, or as the ratio of prior
/// Monte Carlo evidences Z(T u C) / Z(C). Both target the same quantity; the
/// ratio avoids the heavy-tailed weights the first suffers when T lies far
/// from what C supports.
enum class LocalEstimator { PosteriorDraws, EvidenceRatio };
std::string to_string(LocalEstimator e);
LocalEstimator local_estimator_from_string(const std::string& s);

struct CorrectionSettings {
  MixingMode mixing = MixingMode::Prior;
  LocalEstimator estimator = LocalEstimator::PosteriorDraws;
  /// EvidenceRatio only.
  Eigen::Index evidence_draws = kDefaultEvidenceDraws;
  RngHandle evidence_rng{};
  /// Weights used in Posterior mode, one per model (e.g. independent-domain
  /// posterior weights). Ignored in Prior mode.
  Eigen::VectorXd mixing_weights;
  bool memoize = true;
};

struct RecursionTerm {
  std::size_t model = 0;
  double log_mixing_weight = 0.0;  // unnormalized
  double log_local = 0.0;          // ln p(T n l | C n l, M_l)
  double log_rest = 0.0;           // ln P(T \ l | C u (T n l))
};

struct RecursionEntry {
  DomainMask target;
  DomainMask conditioning;
  std::vector<RecursionTerm> terms;
  double log_value = 0.0;
  double standard_error = 0.0;
};

struct CorrectionLedger {
  MixingMode mixing = MixingMode::Prior;
  Eigen::VectorXd log_factors;      // ln p(y^(-k) | y^(k)) per model
  Eigen::VectorXd standard_errors;  // delta-method approximation
  std::vector<RecursionEntry> trace;
  std::size_t evaluations = 0;  // recursion nodes evaluated (memo hits excluded)
};

/// Corrective factors for every model of every class via the decreasing
/// recursion P(T | C) = sum_{l in S} a_l p(T n l | C n l, M_l) P(T \ l | C u (T n l)) / sum_{l in S} a_l,
/// S = models whose domain meets T, a_l = prior (or mixing) weights.
CorrectionLedger corrective_factor_general(const DomainPartition& partition, const std::vector<ModelSpec>& specs,
                                           const Dataset& data, PosteriorCache& samples,
                                           const CorrectionSettings& settings = {});

nlohmann::json to_json(const CorrectionLedger& ledger, const std::vector<ModelSpec>& specs);

/// Models whose coverage rule includes (x, observable).
std::vector<std::size_t> covering_models(const std::vector<ModelSpec>& specs, const Eigen::RowVectorXd& x,
                                         const std::string& observable);

struct LocalMixture {
  Eigen::MatrixXd draws;                          // n_out x query points
  std::vector<std::vector<std::size_t>> contributors;  // per query point
};

/// Per query point j: draws from sum_{k covers j} w_k p_k / sum_{k covers j} w_k.
/// `per_model[k]` holds model k's predictive draws at the query points.
LocalMixture local_mixture_predict(const Eigen::VectorXd& weights, const std::vector<ModelSpec>& specs,
                                   const std::vector<Eigen::MatrixXd>& per_model, const Eigen::MatrixXd& xstar,
                                   const std::vector<std::string>& observable, Eigen::Index n_out, Rng& rng);

struct LocalMoments {
  Eigen::VectorXd mean, variance;
  std::vector<std::vector<std::size_t>> contributors;
};

/// Closed-form moments of the same local mixture from per-model moments.
LocalMoments local_mixture_moments(const Eigen::VectorXd& weights, const std::vector<ModelSpec>& specs,
                                   const std::vector<PredictiveMoments>& per_model, const Eigen::MatrixXd& xstar,
                                   const std::vector<std::string>& observable);

/// Model indices by descending weight; equal weights keep declaration order.
std::vector<std::size_t> rank_by_weight(const Eigen::VectorXd& weights);

/// First model in `ranking` covering (x, observable).
std::size_t local_model_select(const std::vector<std::size_t>& ranking, const std::vector<ModelSpec>& specs,
                               const Eigen::RowVectorXd& x, const std::string& observable);

}  // namespace bma
