#include "bma/model.hpp"

#include <algorithm>
#include <cmath>

#include "bma/errors.hpp"

namespace bma {

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(Eigen::MatrixXd locations, Eigen::VectorXd values, std::vector<std::string> observable,
                 std::vector<PointId> ids)
    : locations_(std::move(locations)),
      values_(std::move(values)),
      observable_(std::move(observable)),
      ids_(std::move(ids)) {
  const auto n = static_cast<std::size_t>(values_.size());
  if (static_cast<std::size_t>(locations_.rows()) != n || observable_.size() != n || ids_.size() != n) {
    throw UsageError("Dataset: inconsistent lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!index_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
      throw UsageError("Dataset: duplicate point id '" + ids_[i] + "'");
    }
  }
}

Eigen::Index Dataset::row_of(const PointId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UsageError("Dataset: unknown point id '" + id + "'");
  return it->second;
}

Dataset Dataset::select(std::span<const Eigen::Index> rows) const {
  Eigen::MatrixXd loc(static_cast<Eigen::Index>(rows.size()), dim());
  Eigen::VectorXd val(static_cast<Eigen::Index>(rows.size()));
  std::vector<std::string> obs;
  std::vector<PointId> id;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    loc.row(static_cast<Eigen::Index>(k)) = locations_.row(rows[k]);
    val[static_cast<Eigen::Index>(k)] = values_[rows[k]];
    obs.push_back(observable_[static_cast<std::size_t>(rows[k])]);
    id.push_back(ids_[static_cast<std::size_t>(rows[k])]);
  }
  return {std::move(loc), std::move(val), std::move(obs), std::move(id)};
}

// ------------------------------------------------------------- DomainMask

DomainMask DomainMask::all(const Dataset& data) {
  return DomainMask(std::set<PointId>(data.ids().begin(), data.ids().end()));
}

DomainMask DomainMask::where(const Dataset& data, const std::function<bool(Eigen::Index)>& pred) {
  std::set<PointId> ids;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (pred(i)) ids.insert(data.ids()[static_cast<std::size_t>(i)]);
  }
  return DomainMask(std::move(ids));
}

bool DomainMask::subset_of(const DomainMask& other) const {
  return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
}

bool DomainMask::intersects(const DomainMask& other) const {
  auto a = ids_.begin();
  auto b = other.ids_.begin();
  while (a != ids_.end() && b != other.ids_.end()) {
    if (*a < *b) {
      ++a;
    } else if (*b < *a) {
      ++b;
    } else {
      return true;
    }
  }
  return false;
}

std::vector<Eigen::Index> DomainMask::rows(const Dataset& data) const {
  std::vector<Eigen::Index> out;
  out.reserve(ids_.size());
  for (const auto& id : ids_) out.push_back(data.row_of(id));
  std::sort(out.begin(), out.end());
  return out;
}

DomainMask operator&(const DomainMask& a, const DomainMask& b) {
  std::set<PointId> out;
  std::set_intersection(a.ids_.begin(), a.ids_.end(), b.ids_.begin(), b.ids_.end(), std::inserter(out, out.end()));
  return DomainMask(std::move(out));
}

DomainMask operator|(const DomainMask& a, const DomainMask& b) {
  std::set<PointId> out = a.ids_;
  out.insert(b.ids_.begin(), b.ids_.end());
  return DomainMask(std::move(out));
}

DomainMask operator-(const DomainMask& a, const DomainMask& b) {
  std::set<PointId> out;
  std::set_difference(a.ids_.begin(), a.ids_.end(), b.ids_.begin(), b.ids_.end(), std::inserter(out, out.end()));
  return DomainMask(std::move(out));
}

// ------------------------------------------------------------------ Prior

double Prior::log_density(double x) const {
  switch (kind) {
    case Kind::Normal:
      return normal_logpdf(x, a, b);
    case Kind::HalfNormal:
      if (!(x > 0.0)) return kNegInf;
      return std::log(2.0) + normal_logpdf(x, 0.0, a);
    case Kind::Gamma:
      if (!(x > 0.0)) return kNegInf;
      return gamma_logpdf(x, a, b);
    case Kind::LogNormal:
      if (!(x > 0.0)) return kNegInf;
      return normal_logpdf(std::log(x), a, b) - std::log(x);
    case Kind::Uniform:
      if (x < a || x > b) return kNegInf;
      return -std::log(b - a);
  }
  return kNegInf;
}

double Prior::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Normal:
      return rng.normal(a, b);
    case Kind::HalfNormal:
      return std::abs(rng.normal()) * a;
    case Kind::Gamma:
      return rng.gamma(a, b);
    case Kind::LogNormal:
      return std::exp(rng.normal(a, b));
    case Kind::Uniform:
      return a + (b - a) * rng.uniform();
  }
  return 0.0;
}

double Prior::mean() const {
  switch (kind) {
    case Kind::Normal:
      return a;
    case Kind::HalfNormal:
      return a * std::sqrt(2.0 / M_PI);
    case Kind::Gamma:
      return a / b;
    case Kind::LogNormal:
      return std::exp(a + 0.5 * b * b);
    case Kind::Uniform:
      return 0.5 * (a + b);
  }
  return 0.0;
}

std::string Prior::kind_name() const {
  switch (kind) {
    case Kind::Normal:
      return "normal";
    case Kind::HalfNormal:
      return "half_normal";
    case Kind::Gamma:
      return "gamma";
    case Kind::LogNormal:
      return "log_normal";
    case Kind::Uniform:
      return "uniform";
  }
  return "?";
}

void Prior::validate() const {
  bool ok = std::isfinite(a) && std::isfinite(b);
  switch (kind) {
    case Kind::Normal:
    case Kind::LogNormal:
      ok = ok && b > 0.0;
      break;
    case Kind::HalfNormal:
      ok = ok && a > 0.0;
      break;
    case Kind::Gamma:
      ok = ok && a > 0.0 && b > 0.0;
      break;
    case Kind::Uniform:
      ok = ok && b > a;
      break;
  }
  if (!ok) throw DomainError("Prior: invalid " + kind_name() + " parameters");
}

// -------------------------------------------------------------- ModelSpec

Eigen::VectorXd Response::operator()(const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(theta_index.size()));
  for (std::size_t j = 0; j < theta_index.size(); ++j) theta[static_cast<Eigen::Index>(j)] = phi[theta_index[j]];
  return fn(X, theta);
}

const Quantity& NoiseModel::sigma(const std::string& observable) const {
  auto it = by_type.find(observable);
  return it == by_type.end() ? fallback : it->second;
}

SqExpKernelParams DiscrepancyConfig::kernel(const Eigen::VectorXd& phi) const {
  SqExpKernelParams k;
  k.eta = eta(phi);
  k.length_scales.resize(static_cast<Eigen::Index>(length_scales.size()));
  for (std::size_t d = 0; d < length_scales.size(); ++d) k.length_scales[static_cast<Eigen::Index>(d)] = length_scales[d](phi);
  return k;
}

DomainMask ModelSpec::effective_domain(const Dataset& data) const {
  return domain ? *domain : DomainMask::all(data);
}

bool ModelSpec::covers(const Eigen::RowVectorXd& x, const std::string& observable) const {
  return !coverage || coverage(x, observable);
}

const Response& ModelSpec::response_for(const std::string& observable) const {
  auto it = response_by_type.find(observable);
  return it == response_by_type.end() ? response : it->second;
}

Eigen::VectorXd ModelSpec::prior_mean() const {
  Eigen::VectorXd m(dim());
  for (Eigen::Index j = 0; j < dim(); ++j) m[j] = parameters[static_cast<std::size_t>(j)].prior.mean();
  return m;
}

Eigen::VectorXd ModelSpec::sample_prior(Rng& rng) const {
  Eigen::VectorXd phi(dim());
  for (Eigen::Index j = 0; j < dim(); ++j) phi[j] = parameters[static_cast<std::size_t>(j)].prior.sample(rng);
  return phi;
}

void ModelSpec::validate() const {
  const std::size_t d = parameters.size();
  std::set<std::string> names;
  for (const auto& p : parameters) {
    if (!names.insert(p.name).second) throw ConfigError(name + ".parameters", "duplicate parameter '" + p.name + "'");
    try {
      p.prior.validate();
    } catch (const DomainError& e) {
      throw ConfigError(name + ".parameters." + p.name, e.what());
    }
  }
  auto check = [&](const Quantity& q, const std::string& where) {
    if (q.param && *q.param >= d) throw ConfigError(name + "." + where, "references a parameter without a prior");
  };
  auto check_response = [&](const Response& r, const std::string& where) {
    if (!r.fn) throw ConfigError(name + "." + where, "missing response function");
    for (auto j : r.theta_index) {
      if (j >= d) throw ConfigError(name + "." + where, "references a parameter without a prior");
    }
  };
  check_response(response, "response");
  for (const auto& [type, r] : response_by_type) check_response(r, "response." + type);
  check(noise.fallback, "noise");
  for (const auto& [type, q] : noise.by_type) check(q, "noise." + type);
  if (discrepancy) {
    check(discrepancy->eta, "discrepancy.eta");
    if (discrepancy->length_scales.empty()) throw ConfigError(name + ".discrepancy", "no length scales");
    for (const auto& q : discrepancy->length_scales) check(q, "discrepancy.length_scales");
  }
  if (!(prior_model_weight > 0.0) || prior_model_weight > 1.0) {
    throw ConfigError(name + ".prior_model_weight", "must lie in (0, 1]");
  }
}

// ------------------------------------------------------------- likelihood

Eigen::VectorXd evaluate_response(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                  std::span<const Eigen::Index> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  if (rows.empty()) return out;
  if (spec.response_by_type.empty()) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), data.dim());
    for (std::size_t k = 0; k < rows.size(); ++k) X.row(static_cast<Eigen::Index>(k)) = data.locations().row(rows[k]);
    out = spec.response(X, phi);
  } else {
    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t k = 0; k < rows.size(); ++k) by_type[data.observable()[static_cast<std::size_t>(rows[k])]].push_back(k);
    for (const auto& [type, ks] : by_type) {
      Eigen::MatrixXd X(static_cast<Eigen::Index>(ks.size()), data.dim());
      for (std::size_t m = 0; m < ks.size(); ++m) X.row(static_cast<Eigen::Index>(m)) = data.locations().row(rows[ks[m]]);
      const Eigen::VectorXd f = spec.response_for(type)(X, phi);
      for (std::size_t m = 0; m < ks.size(); ++m) out[static_cast<Eigen::Index>(ks[m])] = f[static_cast<Eigen::Index>(m)];
    }
  }
  if (out.size() != static_cast<Eigen::Index>(rows.size())) throw ModelEvaluationError(spec.name + ": response returned wrong length");
  if (!out.allFinite()) throw ModelEvaluationError(spec.name + ": non-finite response");
  return out;
}

namespace {

std::string gp_group(const ModelSpec& spec, const std::string& observable) {
  return spec.discrepancy && spec.discrepancy->per_type ? observable : std::string();
}

}  // namespace

BoundLikelihood::BoundLikelihood(const ModelSpec& spec, const Dataset& data, const DomainMask& subset)
    : spec_(&spec), data_(&data) {
  if (spec.domain && !subset.subset_of(*spec.domain)) {
    throw DomainViolationError(spec.name + ": likelihood subset is not inside the model domain");
  }
  rows_ = subset.rows(data);
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    groups_[gp_group(spec, data.observable()[static_cast<std::size_t>(rows_[k])])].push_back(static_cast<Eigen::Index>(k));
  }
}

BoundLikelihood::BoundLikelihood(const ModelSpec& spec, const Dataset& data, std::vector<Eigen::Index> rows)
    : spec_(&spec), data_(&data), rows_(std::move(rows)) {
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    groups_[gp_group(spec, data.observable()[static_cast<std::size_t>(rows_[k])])].push_back(static_cast<Eigen::Index>(k));
  }
}

double BoundLikelihood::operator()(const Eigen::VectorXd& phi) const {
  if (rows_.empty()) return 0.0;
  const ModelSpec& spec = *spec_;
  const Dataset& data = *data_;
  if (phi.size() != spec.dim()) throw UsageError(spec.name + ": phi has the wrong dimension");
  const Eigen::VectorXd f = evaluate_response(spec, phi, data, rows_);

  if (!spec.discrepancy) {
    double ll = 0.0;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto row = rows_[k];
      const double sd = spec.noise.sigma(data.observable()[static_cast<std::size_t>(row)])(phi);
      if (!(sd > 0.0)) return kNegInf;
      ll += normal_logpdf(data.values()[row], f[static_cast<Eigen::Index>(k)], sd);
    }
    return ll;
  }

  const SqExpKernelParams kernel = spec.discrepancy->kernel(phi);
  if (!(kernel.eta > 0.0) || !(kernel.length_scales.array() > 0.0).all()) return kNegInf;
  double ll = 0.0;
  for (const auto& [group, ks] : groups_) {
    const auto n = static_cast<Eigen::Index>(ks.size());
    Eigen::MatrixXd X(n, data.dim());
    Eigen::VectorXd r(n), sd(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      const auto k = ks[static_cast<std::size_t>(m)];
      const auto row = rows_[static_cast<std::size_t>(k)];
      X.row(m) = data.locations().row(row);
      r[m] = data.values()[row] - f[k];
      sd[m] = spec.noise.sigma(data.observable()[static_cast<std::size_t>(row)])(phi);
      if (sd[m] < 0.0) return kNegInf;
    }
    ll += GPPosterior::fit(X, r, kernel, sd, spec.discrepancy->jitter).log_marginal_likelihood();
  }
  return ll;
}

double log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                      const DomainMask& subset) {
  return BoundLikelihood(spec, data, subset)(phi);
}

double conditional_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                  const DomainMask& target, const DomainMask& given) {
  if (!spec.discrepancy || given.empty()) return log_likelihood(spec, phi, data, target);
  const double joint = log_likelihood(spec, phi, data, target | given);
  if (joint == kNegInf) return kNegInf;
  return joint - log_likelihood(spec, phi, data, given);
}

double log_prior(const ModelSpec& spec, const Eigen::VectorXd& phi) {
  if (phi.size() != spec.dim()) throw UsageError(spec.name + ": phi has the wrong dimension");
  double lp = 0.0;
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    if (!std::isfinite(phi[j])) return kNegInf;
    lp += spec.parameters[static_cast<std::size_t>(j)].prior.log_density(phi[j]);
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

// ------------------------------------------------------------- prediction

PredictiveMoments predictive_moments(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                     const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable) {
  const Eigen::Index m = xstar.rows();
  if (static_cast<Eigen::Index>(observable.size()) != m) throw UsageError("predictive: observable labels length mismatch");
  if (xstar.cols() != data.dim() && data.size() > 0) throw UsageError("predictive: location dimension mismatch");

  PredictiveMoments out;
  out.mean.resize(m);
  out.variance.resize(m);

  // Response at the query rows, per observable type.
  std::map<std::string, std::vector<Eigen::Index>> by_type;
  for (Eigen::Index i = 0; i < m; ++i) by_type[observable[static_cast<std::size_t>(i)]].push_back(i);
  for (const auto& [type, is] : by_type) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(is.size()), xstar.cols());
    for (std::size_t k = 0; k < is.size(); ++k) X.row(static_cast<Eigen::Index>(k)) = xstar.row(is[k]);
    const Eigen::VectorXd f = spec.response_for(type)(X, phi);
    if (!f.allFinite()) throw ModelEvaluationError(spec.name + ": non-finite response");
    const double sd = spec.noise.sigma(type)(phi);
    for (std::size_t k = 0; k < is.size(); ++k) {
      out.mean[is[k]] = f[static_cast<Eigen::Index>(k)];
      out.variance[is[k]] = sd * sd;
    }
  }
  if (!spec.discrepancy) return out;

  // Condition the discrepancy on in-domain residuals at phi.
  const SqExpKernelParams kernel = spec.discrepancy->kernel(phi);
  const std::vector<Eigen::Index> train = spec.effective_domain(data).rows(data);
  const Eigen::VectorXd f_train = evaluate_response(spec, phi, data, train);
  std::map<std::string, std::vector<std::size_t>> train_groups;
  for (std::size_t k = 0; k < train.size(); ++k) {
    train_groups[gp_group(spec, data.observable()[static_cast<std::size_t>(train[k])])].push_back(k);
  }
  std::map<std::string, std::vector<Eigen::Index>> query_groups;
  for (Eigen::Index i = 0; i < m; ++i) query_groups[gp_group(spec, observable[static_cast<std::size_t>(i)])].push_back(i);

  for (const auto& [group, qs] : query_groups) {
    const auto& ks = train_groups[group];
    const auto n = static_cast<Eigen::Index>(ks.size());
    Eigen::MatrixXd X(n, data.dim());
    Eigen::VectorXd r(n), sd(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto row = train[ks[static_cast<std::size_t>(j)]];
      X.row(j) = data.locations().row(row);
      r[j] = data.values()[row] - f_train[static_cast<Eigen::Index>(ks[static_cast<std::size_t>(j)])];
      sd[j] = spec.noise.sigma(data.observable()[static_cast<std::size_t>(row)])(phi);
    }
    const GPPosterior gp = GPPosterior::fit(X, r, kernel, sd, spec.discrepancy->jitter);
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(qs.size()), xstar.cols());
    for (std::size_t k = 0; k < qs.size(); ++k) Q.row(static_cast<Eigen::Index>(k)) = xstar.row(qs[k]);
    const GPPrediction p = gp.predict(Q);
    for (std::size_t k = 0; k < qs.size(); ++k) {
      out.mean[qs[k]] += p.mean[static_cast<Eigen::Index>(k)];
      out.variance[qs[k]] += p.variance[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

Eigen::VectorXd predictive_draws(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                                 const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable, Rng& rng) {
  const PredictiveMoments pm = predictive_moments(spec, phi, data, xstar, observable);
  Eigen::VectorXd out(pm.mean.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double sd = std::sqrt(std::max(pm.variance[i], 0.0));
    out[i] = sd > 0.0 ? pm.mean[i] + sd * rng.normal() : pm.mean[i];
  }
  return out;
}

double predictive_draw(const ModelSpec& spec, const Eigen::VectorXd& phi, const Dataset& data,
                       const Eigen::RowVectorXd& xstar, const std::string& observable, Rng& rng) {
  return predictive_draws(spec, phi, data, xstar, {observable}, rng)[0];
}

}  // namespace bma
