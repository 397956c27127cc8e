#pragma once

// Datasets, model domains and the full statistical model
//   y_i = f^{o(i)}(x_i, theta) + delta(x_i) + sigma_{o(i)} eps_i
// evaluated over any subset of the data.

#include <Eigen/Core>

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bma/prob.hpp"
#include "bma/surrogate.hpp"

namespace bma {

using PointId = std::string;

/// Observations: one row per point.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd locations, Eigen::VectorXd values, std::vector<std::string> observable,
          std::vector<PointId> ids);

  [[nodiscard]] Eigen::Index size() const { return values_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return locations_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& locations() const { return locations_; }
  [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
  [[nodiscard]] const std::vector<std::string>& observable() const { return observable_; }
  [[nodiscard]] const std::vector<PointId>& ids() const { return ids_; }

  [[nodiscard]] Eigen::Index row_of(const PointId& id) const;
  [[nodiscard]] bool has(const PointId& id) const { return index_.count(id) != 0; }

  /// Dataset restricted to the given rows, in the given order.
  [[nodiscard]] Dataset select(std::span<const Eigen::Index> rows) const;

 private:
  Eigen::MatrixXd locations_;
  Eigen::VectorXd values_;
  std::vector<std::string> observable_;
  std::vector<PointId> ids_;
  std::map<PointId, Eigen::Index> index_;
};

/// Set of point ids a model is defined on.
class DomainMask {
 public:
  DomainMask() = default;
  explicit DomainMask(std::set<PointId> ids) : ids_(std::move(ids)) {}
  DomainMask(std::initializer_list<PointId> ids) : ids_(ids) {}

  static DomainMask all(const Dataset& data);
  /// Rows whose location satisfies `pred`.
  static DomainMask where(const Dataset& data, const std::function<bool(Eigen::Index)>& pred);

  [[nodiscard]] const std::set<PointId>& ids() const { return ids_; }
  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] bool empty() const { return ids_.empty(); }
  [[nodiscard]] bool contains(const PointId& id) const { return ids_.count(id) != 0; }
  [[nodiscard]] bool subset_of(const DomainMask& other) const;
  [[nodiscard]] bool intersects(const DomainMask& other) const;

  /// Dataset rows of the members, ascending; throws UsageError on unknown ids.
  [[nodiscard]] std::vector<Eigen::Index> rows(const Dataset& data) const;

  friend DomainMask operator&(const DomainMask& a, const DomainMask& b);
  friend DomainMask operator|(const DomainMask& a, const DomainMask& b);
  friend DomainMask operator-(const DomainMask& a, const DomainMask& b);
  friend bool operator==(const DomainMask&, const DomainMask&) = default;
  friend bool operator<(const DomainMask& a, const DomainMask& b) { return a.ids_ < b.ids_; }

 private:
  std::set<PointId> ids_;
};

/// Univariate prior on one component of phi.
struct Prior {
  enum class Kind { Normal, HalfNormal, Gamma, LogNormal, Uniform };

  Kind kind = Kind::Normal;
  double a = 0.0;  // normal: mean, half-normal: scale, gamma: shape, log-normal: mu, uniform: lower
  double b = 1.0;  // normal: sd, gamma: rate, log-normal: sigma, uniform: upper

  static Prior normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }
  static Prior half_normal(double scale) { return {Kind::HalfNormal, scale, 0.0}; }
  static Prior gamma(double shape, double rate) { return {Kind::Gamma, shape, rate}; }
  static Prior log_normal(double mu, double sigma) { return {Kind::LogNormal, mu, sigma}; }
  static Prior uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }

  /// -inf outside the support.
  [[nodiscard]] double log_density(double x) const;
  [[nodiscard]] double sample(Rng& rng) const;
  [[nodiscard]] double mean() const;
  /// Support is (0, inf).
  [[nodiscard]] bool positive() const { return kind == Kind::HalfNormal || kind == Kind::Gamma || kind == Kind::LogNormal; }
  [[nodiscard]] std::string kind_name() const;
  void validate() const;
};

struct Parameter {
  std::string name;
  Prior prior;
};

/// A scalar that is either fixed or read from phi.
struct Quantity {
  std::optional<std::size_t> param;
  double fixed = 0.0;

  static Quantity constant(double v) { return {std::nullopt, v}; }
  static Quantity parameter(std::size_t index) { return {index, 0.0}; }

  [[nodiscard]] double operator()(const Eigen::VectorXd& phi) const { return param ? phi[*param] : fixed; }
};

/// Response evaluated on theta = phi[theta_index].
struct Response {
  ResponseFn fn;
  std::vector<std::size_t> theta_index;

  [[nodiscard]] Eigen::VectorXd operator()(const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) const;
};

/// Per-observable-type noise scale sigma_l; `fallback` covers unlisted types.
struct NoiseModel {
  Quantity fallback = Quantity::constant(1.0);
  std::map<std::string, Quantity> by_type;

  [[nodiscard]] const Quantity& sigma(const std::string& observable) const;
};

/// Zero-mean squared-exponential GP discrepancy, integrated out of the likelihood.
struct DiscrepancyConfig {
  Quantity eta = Quantity::constant(1.0);
  std::vector<Quantity> length_scales;
  /// One independent GP per observable type (default) or a single shared GP.
  bool per_type = true;
  std::optional<double> jitter;

  [[nodiscard]] SqExpKernelParams kernel(const Eigen::VectorXd& phi) const;
};

/// Whether a model produces a prediction at a location.
using CoverageRule = std::function<bool(const Eigen::RowVectorXd& x, const std::string& observable)>;

struct ModelSpec {
  std::string name;
  Response response;
  std::map<std::string, Response> response_by_type;
  std::vector<Parameter> parameters;
  NoiseModel noise;
  std::optional<DiscrepancyConfig> discrepancy;
  /// Points the model is defined on; nullopt means every dataset point.
  std::optional<DomainMask> domain;
  /// Prediction rule at new locations; empty means "covers everything".
  CoverageRule coverage;
  double prior_model_weight = 1.0;

  [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(parameters.size()); }
  [[nodiscard]] DomainMask effective_domain(const Dataset& data) const;
  [[nodiscard]] bool covers(const Eigen::RowVectorXd& x, const std::string& observable) const;
  [[nodiscard]] const Response& response_for(const std::string& observable) const;
  /// Prior means (positive parameters: mean of their prior too).
  [[nodiscard]] Eigen::VectorXd prior_mean() const;
  [[nodiscard]] Eigen::VectorXd sample_prior(Rng& rng) const;
  /// Throws ConfigError on dangling parameter references or bad priors.
  void validate() const;
};

/// Responses at the given dataset rows, grouped per observable type.
Eigen::VectorXd evaluate_response(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                  std::span<const Eigen::Index> rows);

/// Likelihood of a fixed subset, with row lookups done once.
class BoundLikelihood {
 public:
  BoundLikelihood(const ModelSpec& spec, const Dataset& data, const DomainMask& subset);
  BoundLikelihood(const ModelSpec& spec, const Dataset& data, std::vector<Eigen::Index> rows);

  [[nodiscard]] double operator()(const Eigen::VectorXd& phi) const;
  [[nodiscard]] const std::vector<Eigen::Index>& rows() const { return rows_; }

 private:
  const ModelSpec* spec_;
  const Dataset* data_;
  std::vector<Eigen::Index> rows_;
  std::map<std::string, std::vector<Eigen::Index>> groups_;  // positions into rows_ per GP group
};

/// sum_i ln N(y_i; f(x_i, phi), sigma^2) over the subset, with the GP
/// discrepancy (if any) marginalized jointly over each group of points.
double log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                      const DomainMask& subset);

/// ln p(y_target | y_given, phi): equals log_likelihood(target) without a
/// discrepancy GP, else log_likelihood(target u given) - log_likelihood(given).
double conditional_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                  const DomainMask& target, const DomainMask& given);

double log_prior(const ModelSpec& spec, const Eigen::VectorXd& phi);

struct PredictiveMoments {
  Eigen::VectorXd mean;      // f(x*, phi) + E[delta(x*)]
  Eigen::VectorXd variance;  // Var[delta(x*)] + sigma^2
};

/// Predictive mean/variance at new rows given phi; the discrepancy GP is
/// conditioned on the model's in-domain residuals at phi.
PredictiveMoments predictive_moments(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                     const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable);

/// One draw of y* per row of xstar.
Eigen::VectorXd predictive_draws(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                 const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable, Rng& rng);

double predictive_draw(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                       const Eigen::RowVectorXd& xstar, const std::string& observable, Rng& rng);

}  // namespace bma
