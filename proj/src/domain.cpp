#include "bma/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bma/ensemble.hpp"
#include "bma/errors.hpp"

namespace bma {

// ---------------------------------------------------------------- partition

DomainMask DomainPartition::class_data(std::size_t c) const {
  DomainMask out;
  for (auto k : classes.at(c)) out = out | masks[k];
  return out;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

DomainPartition build_partition(const std::vector<ModelSpec>& specs, const Dataset& data) {
  if (specs.empty()) throw UsageError("build_partition: no models");
  DomainPartition p;
  for (const auto& s : specs) p.masks.push_back(s.effective_domain(data));
  for (const auto& m : p.masks) p.all = p.all | m;
  for (const auto& id : data.ids()) {
    if (!p.all.contains(id)) throw CoverageError("build_partition: point '" + id + "' is not in any model domain");
  }
  p.union_check = true;
  p.common_core = p.masks.front();
  for (const auto& m : p.masks) p.common_core = p.common_core & m;

  const std::size_t k = specs.size();
  UnionFind uf(k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      if (p.masks[a].intersects(p.masks[b])) uf.unite(a, b);
    }
  }
  std::vector<std::size_t> empty;
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < k; ++i) {
    if (p.masks[i].empty()) {
      empty.push_back(i);
    } else {
      groups[uf.find(i)].push_back(i);
    }
  }
  for (auto& [root, members] : groups) {
    std::vector<std::size_t> cls = members;
    cls.insert(cls.end(), empty.begin(), empty.end());
    std::sort(cls.begin(), cls.end());
    p.classes.push_back(std::move(cls));
  }
  if (p.classes.empty()) p.classes.push_back(empty);
  if (p.classes.size() > 1) {
    p.warnings.push_back("models split into " + std::to_string(p.classes.size()) +
                         " disjoint classes; weights are only comparable within a class");
  }
  return p;
}

// ------------------------------------------------------------- sample cache

PosteriorCache::PosteriorCache(const std::vector<ModelSpec>& specs, const Dataset& data, ChainSettings settings,
                               RngHandle rng, Eigen::Index prior_draws)
    : specs_(&specs), data_(&data), settings_(std::move(settings)), rng_(rng), prior_draws_(prior_draws) {}

namespace {

std::uint64_t stream_key(std::size_t model, const DomainMask& m) {
  std::string key = std::to_string(model);
  for (const auto& id : m.ids()) {
    key += '\x1f';
    key += id;
  }
  return fnv1a64(key);
}

}  // namespace

const PosteriorSamples& PosteriorCache::get(std::size_t model, const DomainMask& conditioning) {
  auto key = std::make_pair(model, conditioning);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;

  const ModelSpec& spec = specs_->at(model);
  const RngHandle h = rng_.split(stream_key(model, conditioning));
  auto ps = std::make_unique<PosteriorSamples>();
  if (conditioning.empty()) {
    Rng r(h);
    ps->seed = h;
    ps->draws.resize(prior_draws_, spec.dim());
    ps->log_post.resize(prior_draws_);
    ps->log_lik = Eigen::VectorXd::Zero(prior_draws_);
    for (Eigen::Index i = 0; i < prior_draws_; ++i) {
      const Eigen::VectorXd phi = spec.sample_prior(r);
      ps->draws.row(i) = phi.transpose();
      ps->log_post[i] = log_prior(spec, phi);
    }
    ps->acceptance_rate = 1.0;
  } else {
    *ps = sample_posterior(spec, *data_, conditioning, settings_, h);
  }
  return *cache_.emplace(std::move(key), std::move(ps)).first->second;
}

void PosteriorCache::put(std::size_t model, const DomainMask& conditioning, PosteriorSamples samples) {
  cache_[{model, conditioning}] = std::make_unique<PosteriorSamples>(std::move(samples));
}

// ------------------------------------------------------- corrective factors

LogMeanEstimate predictive_log_density(const ModelSpec& spec, const PosteriorSamples& samples, const Dataset& data,
                                       const DomainMask& target, const DomainMask& given) {
  if (samples.size() == 0) throw UsageError("predictive_log_density: no posterior draws");
  if (target.empty()) return {0.0, 0.0, false};
  const bool coupled = spec.discrepancy.has_value() && !given.empty();
  const BoundLikelihood joint(spec, data, coupled ? (target | given) : target);
  std::optional<BoundLikelihood> cond;
  if (coupled) cond.emplace(spec, data, given);
  Eigen::VectorXd v(samples.size());
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd phi = samples.draws.row(i).transpose();
    double ll = joint(phi);
    if (coupled && ll > kNegInf) ll -= (*cond)(phi);
    v[i] = std::isnan(ll) ? kNegInf : ll;
  }
  return log_mean_exp_with_se(v);
}

LogMeanEstimate corrective_factor_two_models(const ModelSpec& spec_a, const ModelSpec& spec_b, const Dataset& data,
                                             const PosteriorSamples& samples_b) {
  const DomainMask all = DomainMask::all(data);
  const DomainMask a = spec_a.effective_domain(data);
  const DomainMask b = spec_b.effective_domain(data);
  const DomainMask missing = all - a;
  if (missing.empty()) return {0.0, 0.0, false};
  if (!missing.subset_of(b)) throw CoverageError("corrective_factor_two_models: y^(-A) is not inside the domain of B");
  return predictive_log_density(spec_b, samples_b, data, missing, a & b);
}

std::string to_string(MixingMode m) { return m == MixingMode::Prior ? "prior" : "posterior"; }

std::string to_string(LocalEstimator e) {
  return e == LocalEstimator::PosteriorDraws ? "posterior-draws" : "evidence-ratio";
}

LocalEstimator local_estimator_from_string(const std::string& s) {
  if (s == "posterior-draws") return LocalEstimator::PosteriorDraws;
  if (s == "evidence-ratio") return LocalEstimator::EvidenceRatio;
  throw UsageError("unknown local estimator '" + s + "'");
}

namespace {

struct Node {
  double log_value = 0.0;
  double variance = 0.0;
};

class Recursion {
 public:
  Recursion(const DomainPartition& partition, const std::vector<std::size_t>& members,
            const std::vector<ModelSpec>& specs, const Dataset& data, PosteriorCache& cache,
            const CorrectionSettings& settings, CorrectionLedger& ledger)
      : partition_(partition), members_(members), specs_(specs), data_(data), cache_(cache), settings_(settings),
        ledger_(ledger) {}

  Node operator()(const DomainMask& target, const DomainMask& given) {
    if (target.empty()) return {};
    auto key = std::make_pair(target, given);
    if (settings_.memoize) {
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }

    RecursionEntry entry;
    entry.target = target;
    entry.conditioning = given;
    std::vector<double> log_terms, log_weights, term_var;
    for (auto l : members_) {
      const DomainMask& ml = partition_.masks[l];
      if (!ml.intersects(target)) continue;
      const double a = log_mixing_weight(l);
      const DomainMask tl = target & ml;
      const DomainMask cl = given & ml;
      const LogMeanEstimate local = local_density(l, tl, cl);
      const Node rest = (*this)(target - ml, given | tl);
      entry.terms.push_back({l, a, local.value, rest.log_value});
      log_weights.push_back(a);
      log_terms.push_back(a + local.value + rest.log_value);
      term_var.push_back(local.standard_error * local.standard_error + rest.variance);
    }
    if (entry.terms.empty()) throw CoverageError("corrective recursion: no model constrains the target set");

    const Eigen::Map<const Eigen::VectorXd> lt(log_terms.data(), static_cast<Eigen::Index>(log_terms.size()));
    const Eigen::Map<const Eigen::VectorXd> lw(log_weights.data(), static_cast<Eigen::Index>(log_weights.size()));
    const double num = log_sum_exp(lt);
    Node out;
    out.log_value = num == kNegInf ? kNegInf : num - log_sum_exp(lw);
    if (num > kNegInf) {
      for (std::size_t i = 0; i < log_terms.size(); ++i) {
        const double share = std::exp(log_terms[i] - num);
        out.variance += share * share * term_var[i];
      }
    }
    entry.log_value = out.log_value;
    entry.standard_error = std::sqrt(out.variance);
    ledger_.trace.push_back(std::move(entry));
    ++ledger_.evaluations;
    if (settings_.memoize) memo_.emplace(std::move(key), out);
    return out;
  }

 private:
  LogMeanEstimate local_density(std::size_t l, const DomainMask& target, const DomainMask& given) {
    if (settings_.estimator == LocalEstimator::PosteriorDraws) {
      return predictive_log_density(specs_[l], cache_.get(l, given), data_, target, given);
    }
    const EvidenceEstimate& joint = evidence(l, target | given);
    const EvidenceEstimate& cond = evidence(l, given);
    LogMeanEstimate out;
    out.degenerate = joint.degenerate || cond.degenerate;
    out.value = joint.log_evidence == kNegInf ? kNegInf : joint.log_evidence - cond.log_evidence;
    out.standard_error = std::hypot(joint.mc_standard_error, cond.mc_standard_error);
    return out;
  }

  const EvidenceEstimate& evidence(std::size_t l, const DomainMask& subset) {
    auto key = std::make_pair(l, subset);
    auto it = evidence_memo_.find(key);
    if (it != evidence_memo_.end()) return it->second;
    EvidenceEstimate e;
    if (!subset.empty()) {
      e = evidence_prior_mc(specs_[l], data_, subset, settings_.evidence_draws,
                            settings_.evidence_rng.split(stream_key(l, subset)));
    }
    return evidence_memo_.emplace(std::move(key), e).first->second;
  }

  double log_mixing_weight(std::size_t l) const {
    const double w = settings_.mixing == MixingMode::Prior ? specs_[l].prior_model_weight
                                                           : settings_.mixing_weights[static_cast<Eigen::Index>(l)];
    return w > 0.0 ? std::log(w) : kNegInf;
  }

  const DomainPartition& partition_;
  const std::vector<std::size_t>& members_;
  const std::vector<ModelSpec>& specs_;
  const Dataset& data_;
  PosteriorCache& cache_;
  const CorrectionSettings& settings_;
  CorrectionLedger& ledger_;
  std::map<std::pair<DomainMask, DomainMask>, Node> memo_;
  std::map<std::pair<std::size_t, DomainMask>, EvidenceEstimate> evidence_memo_;
};

}  // namespace

CorrectionLedger corrective_factor_general(const DomainPartition& partition, const std::vector<ModelSpec>& specs,
                                           const Dataset& data, PosteriorCache& samples,
                                           const CorrectionSettings& settings) {
  const auto k = static_cast<Eigen::Index>(specs.size());
  if (partition.masks.size() != specs.size()) throw UsageError("corrective_factor_general: partition/model mismatch");
  if (settings.mixing == MixingMode::Posterior && settings.mixing_weights.size() != k) {
    throw UsageError("corrective_factor_general: posterior mixing needs one weight per model");
  }
  CorrectionLedger ledger;
  ledger.mixing = settings.mixing;
  ledger.log_factors = Eigen::VectorXd::Zero(k);
  ledger.standard_errors = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd variance = Eigen::VectorXd::Zero(k);

  for (std::size_t c = 0; c < partition.classes.size(); ++c) {
    const auto& members = partition.classes[c];
    const DomainMask cls = partition.class_data(c);
    Recursion rec(partition, members, specs, data, samples, settings, ledger);
    for (auto m : members) {
      const DomainMask own = partition.masks[m];
      const Node n = rec(cls - own, own);
      const auto i = static_cast<Eigen::Index>(m);
      ledger.log_factors[i] =
          (ledger.log_factors[i] == kNegInf || n.log_value == kNegInf) ? kNegInf : ledger.log_factors[i] + n.log_value;
      variance[i] += n.variance;
    }
  }
  ledger.standard_errors = variance.cwiseSqrt();
  return ledger;
}

nlohmann::json to_json(const CorrectionLedger& ledger, const std::vector<ModelSpec>& specs) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v < 0 ? "-inf" : "inf";
  };
  auto ids = [](const DomainMask& m) { return nlohmann::json(std::vector<std::string>(m.ids().begin(), m.ids().end())); };
  nlohmann::json j;
  j["mixing"] = to_string(ledger.mixing);
  nlohmann::json factors = nlohmann::json::object();
  for (std::size_t k = 0; k < specs.size(); ++k) {
    factors[specs[k].name] = {{"log_factor", num(ledger.log_factors[static_cast<Eigen::Index>(k)])},
                              {"standard_error", ledger.standard_errors[static_cast<Eigen::Index>(k)]}};
  }
  j["factors"] = factors;
  j["evaluations"] = ledger.evaluations;
  auto trace = nlohmann::json::array();
  for (const auto& e : ledger.trace) {
    auto terms = nlohmann::json::array();
    for (const auto& t : e.terms) {
      terms.push_back({{"model", specs[t.model].name},
                       {"log_mixing_weight", num(t.log_mixing_weight)},
                       {"log_local", num(t.log_local)},
                       {"log_rest", num(t.log_rest)}});
    }
    trace.push_back({{"target", ids(e.target)},
                     {"conditioning", ids(e.conditioning)},
                     {"terms", terms},
                     {"log_value", num(e.log_value)},
                     {"standard_error", e.standard_error}});
  }
  j["trace"] = trace;
  return j;
}

// --------------------------------------------------------- local prediction

std::vector<std::size_t> covering_models(const std::vector<ModelSpec>& specs, const Eigen::RowVectorXd& x,
                                         const std::string& observable) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].covers(x, observable)) out.push_back(k);
  }
  return out;
}

namespace {

Eigen::VectorXd local_weights(const Eigen::VectorXd& weights, const std::vector<std::size_t>& cover) {
  if (cover.empty()) throw CoverageError("local mixture: no model covers the query point");
  Eigen::VectorXd w(static_cast<Eigen::Index>(cover.size()));
  for (std::size_t i = 0; i < cover.size(); ++i) w[static_cast<Eigen::Index>(i)] = weights[static_cast<Eigen::Index>(cover[i])];
  const double s = w.sum();
  if (!(s > 0.0)) throw DegenerateWeightsError("local mixture: covering models all have zero weight");
  return w / s;
}

}  // namespace

LocalMixture local_mixture_predict(const Eigen::VectorXd& weights, const std::vector<ModelSpec>& specs,
                                   const std::vector<Eigen::MatrixXd>& per_model, const Eigen::MatrixXd& xstar,
                                   const std::vector<std::string>& observable, Eigen::Index n_out, Rng& rng) {
  if (per_model.size() != specs.size() || weights.size() != static_cast<Eigen::Index>(specs.size())) {
    throw UsageError("local_mixture_predict: one weight and draw matrix per model required");
  }
  LocalMixture out;
  out.draws.resize(n_out, xstar.rows());
  for (Eigen::Index j = 0; j < xstar.rows(); ++j) {
    const auto cover = covering_models(specs, xstar.row(j), observable[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd w = local_weights(weights, cover);
    std::vector<Eigen::VectorXd> cols;
    for (auto k : cover) cols.emplace_back(per_model[k].col(j));
    out.draws.col(j) = bma_mixture_draws(w, cols, n_out, rng);
    out.contributors.push_back(cover);
  }
  return out;
}

LocalMoments local_mixture_moments(const Eigen::VectorXd& weights, const std::vector<ModelSpec>& specs,
                                   const std::vector<PredictiveMoments>& per_model, const Eigen::MatrixXd& xstar,
                                   const std::vector<std::string>& observable) {
  if (per_model.size() != specs.size()) throw UsageError("local_mixture_moments: one moment set per model required");
  LocalMoments out;
  out.mean.resize(xstar.rows());
  out.variance.resize(xstar.rows());
  for (Eigen::Index j = 0; j < xstar.rows(); ++j) {
    const auto cover = covering_models(specs, xstar.row(j), observable[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd w = local_weights(weights, cover);
    Eigen::VectorXd m(w.size()), v(w.size());
    for (std::size_t i = 0; i < cover.size(); ++i) {
      m[static_cast<Eigen::Index>(i)] = per_model[cover[i]].mean[j];
      v[static_cast<Eigen::Index>(i)] = per_model[cover[i]].variance[j];
    }
    const BmaVariance bv = bma_variance(w, m, v);
    out.mean[j] = bma_mean(w, m);
    out.variance[j] = bv.total();
    out.contributors.push_back(cover);
  }
  return out;
}

std::vector<std::size_t> rank_by_weight(const Eigen::VectorXd& weights) {
  std::vector<std::size_t> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return weights[static_cast<Eigen::Index>(a)] > weights[static_cast<Eigen::Index>(b)];
  });
  return order;
}

std::size_t local_model_select(const std::vector<std::size_t>& ranking, const std::vector<ModelSpec>& specs,
                               const Eigen::RowVectorXd& x, const std::string& observable) {
  for (auto k : ranking) {
    if (specs.at(k).covers(x, observable)) return k;
  }
  throw CoverageError("local_model_select: no model covers the query point");
}

}  // namespace bma
