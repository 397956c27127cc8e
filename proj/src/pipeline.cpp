#include "bma/pipeline.hpp"

#include <cmath>
#include <future>
#include <map>
#include <sstream>

#include "bma/errors.hpp"

namespace bma {

using nlohmann::json;

std::string to_string(PipelineStage s) {
  switch (s) {
    case PipelineStage::Calibrate: return "calibrate";
    case PipelineStage::Evidence: return "evidence";
    case PipelineStage::Weights: return "weights";
    case PipelineStage::Predict: return "predict";
    case PipelineStage::Diagnose: return "diagnose";
  }
  return "diagnose";
}

namespace {

// ------------------------------------------------------------ model parsing

struct ModelParser {
  std::string path;
  std::map<std::string, std::size_t> params;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ConfigError(path + (field.empty() ? "" : "." + field), what);
  }

  Quantity quantity(const json& j, const std::string& field) const {
    if (j.is_number()) return Quantity::constant(j.get<double>());
    if (j.is_string()) {
      auto it = params.find(j.get<std::string>());
      if (it == params.end()) fail(field, "unknown parameter '" + j.get<std::string>() + "'");
      return Quantity::parameter(it->second);
    }
    fail(field, "expected a number or a parameter name");
  }

  const json& need(const json& j, const char* key, const std::string& field) const {
    if (!j.is_object() || !j.contains(key)) fail(field.empty() ? key : field + "." + key, "missing");
    return j.at(key);
  }

  Prior prior(const json& j, const std::string& field) const {
    if (!j.is_object()) fail(field, "expected an object");
    const std::string type = need(j, "type", field).get<std::string>();
    auto num = [&](const char* k) {
      const auto& v = need(j, k, field);
      if (!v.is_number()) fail(field + "." + k, "expected a number");
      return v.get<double>();
    };
    Prior p;
    if (type == "normal") {
      p = Prior::normal(num("mean"), num("sd"));
    } else if (type == "half_normal") {
      p = Prior::half_normal(num("scale"));
    } else if (type == "gamma") {
      p = Prior::gamma(num("shape"), num("rate"));
    } else if (type == "log_normal") {
      p = Prior::log_normal(num("mu"), num("sigma"));
    } else if (type == "uniform") {
      p = Prior::uniform(num("lower"), num("upper"));
    } else {
      fail(field + ".type", "expected normal|half_normal|gamma|log_normal|uniform");
    }
    try {
      p.validate();
    } catch (const std::exception& e) {
      fail(field, e.what());
    }
    return p;
  }

  static std::vector<double> location_key(const Eigen::RowVectorXd& x) { return {x.data(), x.data() + x.size()}; }

  ResponseFn response(const json& j, const std::string& field, const std::vector<const Dataset*>& datasets,
                      const std::filesystem::path& base_dir) const {
    if (!j.is_object()) fail(field, "expected an object");
    const auto& tv = need(j, "type", field);
    if (!tv.is_string()) fail(field + ".type", "expected a string");
    const std::string type = tv.get<std::string>();
    if (type == "constant") {
      const Quantity v = quantity(need(j, "value", field), field + ".value");
      return [v](const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) {
        return Eigen::VectorXd(Eigen::VectorXd::Constant(X.rows(), v(phi)));
      };
    }
    if (type == "polynomial") {
      const auto& cj = need(j, "coefficients", field);
      if (!cj.is_array() || cj.empty()) fail(field + ".coefficients", "expected a non-empty array");
      std::vector<Quantity> coef;
      for (std::size_t i = 0; i < cj.size(); ++i) {
        coef.push_back(quantity(cj[i], field + ".coefficients[" + std::to_string(i) + "]"));
      }
      return [coef](const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
        for (auto it = coef.rbegin(); it != coef.rend(); ++it) {
          out = (out.array() * X.col(0).array() + (*it)(phi)).matrix();
        }
        return out;
      };
    }
    if (type == "woods_saxon") {
      const Quantity depth = quantity(need(j, "depth", field), field + ".depth");
      const Quantity radius = quantity(need(j, "radius", field), field + ".radius");
      const Quantity diff = quantity(need(j, "diffuseness", field), field + ".diffuseness");
      return [depth, radius, diff](const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) {
        const double v = depth(phi), r0 = radius(phi), a = diff(phi);
        return Eigen::VectorXd((-v / (1.0 + ((X.col(0).array() - r0) / a).exp())).matrix());
      };
    }
    if (type == "coulomb") {
      const Quantity s = quantity(need(j, "strength", field), field + ".strength");
      return [s](const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) {
        return Eigen::VectorXd((-s(phi) / X.col(0).array()).matrix());
      };
    }
    if (type == "table") {
      const auto& fj = need(j, "file", field);
      if (!fj.is_string()) fail(field + ".file", "expected a path");
      std::filesystem::path file = fj.get<std::string>();
      if (file.is_relative()) file = base_dir / file;
      const std::string column = j.contains("column") ? j.at("column").get<std::string>() : std::string();
      const auto table = read_table_csv(file, column);
      // Model runs are keyed by point id; map them onto locations.
      auto by_loc = std::make_shared<std::map<std::vector<double>, double>>();
      for (const Dataset* d : datasets) {
        for (Eigen::Index i = 0; i < d->size(); ++i) {
          auto it = table.find(d->ids()[static_cast<std::size_t>(i)]);
          if (it != table.end()) (*by_loc)[location_key(d->locations().row(i))] = it->second;
        }
      }
      const Quantity offset = j.contains("offset") ? quantity(j.at("offset"), field + ".offset") : Quantity::constant(0.0);
      const Quantity scale = j.contains("scale") ? quantity(j.at("scale"), field + ".scale") : Quantity::constant(1.0);
      return [by_loc, offset, scale](const Eigen::MatrixXd& X, const Eigen::VectorXd& phi) {
        Eigen::VectorXd out(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
          auto it = by_loc->find(location_key(X.row(i)));
          out[i] = it == by_loc->end() ? std::numeric_limits<double>::quiet_NaN()
                                       : scale(phi) * it->second + offset(phi);
        }
        return out;
      };
    }
    fail(field + ".type", "expected constant|polynomial|woods_saxon|coulomb|table, got '" + type + "'");
  }
};

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(path + "." + k, "unknown key");
  }
}

}  // namespace

std::vector<ModelSpec> models_from_json(const json& models, const std::vector<const Dataset*>& datasets,
                                        const std::filesystem::path& base_dir) {
  if (!models.is_array() || models.empty()) throw ConfigError("pipeline.models", "expected a non-empty array");
  if (datasets.empty()) throw UsageError("models_from_json: training data required");
  const Dataset& train = *datasets.front();
  std::vector<ModelSpec> specs;
  bool any_weight = false, all_weight = true;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const json& mj = models[m];
    ModelParser p{"pipeline.models[" + std::to_string(m) + "]", {}};
    check_keys(mj, p.path,
               {"name", "prior_weight", "parameters", "response", "response_by_type", "noise", "discrepancy", "domain",
                "coverage"});
    ModelSpec s;
    const auto& nj = p.need(mj, "name", "");
    if (!nj.is_string() || nj.get<std::string>().empty()) p.fail("name", "expected a non-empty string");
    s.name = nj.get<std::string>();
    for (const auto& other : specs) {
      if (other.name == s.name) p.fail("name", "duplicate model name '" + s.name + "'");
    }
    if (mj.contains("parameters")) {
      const auto& pj = mj.at("parameters");
      if (!pj.is_array()) p.fail("parameters", "expected an array");
      for (std::size_t i = 0; i < pj.size(); ++i) {
        const std::string f = "parameters[" + std::to_string(i) + "]";
        const auto& name = p.need(pj[i], "name", f);
        if (!name.is_string()) p.fail(f + ".name", "expected a string");
        if (p.params.count(name.get<std::string>())) p.fail(f + ".name", "duplicate parameter");
        p.params[name.get<std::string>()] = s.parameters.size();
        s.parameters.push_back({name.get<std::string>(), p.prior(p.need(pj[i], "prior", f), f + ".prior")});
      }
    }
    s.response.fn = p.response(p.need(mj, "response", ""), "response", datasets, base_dir);
    for (std::size_t i = 0; i < s.parameters.size(); ++i) s.response.theta_index.push_back(i);
    if (mj.contains("response_by_type")) {
      const auto& rj = mj.at("response_by_type");
      if (!rj.is_object()) p.fail("response_by_type", "expected an object");
      for (const auto& [type, r] : rj.items()) {
        Response resp;
        resp.fn = p.response(r, "response_by_type." + type, datasets, base_dir);
        resp.theta_index = s.response.theta_index;
        s.response_by_type[type] = std::move(resp);
      }
    }
    if (mj.contains("noise")) {
      const auto& n = mj.at("noise");
      check_keys(n, p.path + ".noise", {"sigma", "by_type"});
      if (n.contains("sigma")) s.noise.fallback = p.quantity(n.at("sigma"), "noise.sigma");
      if (n.contains("by_type")) {
        for (const auto& [type, q] : n.at("by_type").items()) {
          s.noise.by_type[type] = p.quantity(q, "noise.by_type." + type);
        }
      }
    }
    if (mj.contains("discrepancy")) {
      const auto& dj = mj.at("discrepancy");
      check_keys(dj, p.path + ".discrepancy", {"eta", "length_scales", "per_type", "jitter"});
      DiscrepancyConfig dc;
      dc.eta = p.quantity(p.need(dj, "eta", "discrepancy"), "discrepancy.eta");
      const auto& lj = p.need(dj, "length_scales", "discrepancy");
      if (!lj.is_array() || static_cast<Eigen::Index>(lj.size()) != train.dim()) {
        p.fail("discrepancy.length_scales", "expected one entry per input dimension");
      }
      for (std::size_t i = 0; i < lj.size(); ++i) {
        dc.length_scales.push_back(p.quantity(lj[i], "discrepancy.length_scales[" + std::to_string(i) + "]"));
      }
      if (dj.contains("per_type")) dc.per_type = dj.at("per_type").get<bool>();
      if (dj.contains("jitter")) dc.jitter = dj.at("jitter").get<double>();
      s.discrepancy = dc;
    }
    // Domain: explicit ids or an axis-aligned box; the box doubles as the
    // coverage rule for new locations.
    std::optional<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>> box;
    auto read_box = [&](const json& bj, const std::string& f) {
      const auto& lo = p.need(bj, "min", f);
      const auto& hi = p.need(bj, "max", f);
      if (!lo.is_array() || !hi.is_array() || static_cast<Eigen::Index>(lo.size()) != train.dim() ||
          static_cast<Eigen::Index>(hi.size()) != train.dim()) {
        p.fail(f, "min/max need one entry per input dimension");
      }
      Eigen::RowVectorXd a(train.dim()), b(train.dim());
      for (Eigen::Index d = 0; d < train.dim(); ++d) {
        a[d] = lo[static_cast<std::size_t>(d)].get<double>();
        b[d] = hi[static_cast<std::size_t>(d)].get<double>();
      }
      return std::make_pair(a, b);
    };
    if (mj.contains("domain")) {
      const auto& dj = mj.at("domain");
      check_keys(dj, p.path + ".domain", {"ids", "min", "max"});
      if (dj.contains("ids")) {
        std::set<PointId> ids;
        for (const auto& id : dj.at("ids")) {
          if (!train.has(id.get<std::string>())) p.fail("domain.ids", "unknown point id '" + id.get<std::string>() + "'");
          ids.insert(id.get<std::string>());
        }
        s.domain = DomainMask(std::move(ids));
        if (!s.domain->empty()) {
          Eigen::RowVectorXd a = Eigen::RowVectorXd::Constant(train.dim(), std::numeric_limits<double>::infinity());
          Eigen::RowVectorXd b = -a;
          for (auto r : s.domain->rows(train)) {
            a = a.cwiseMin(train.locations().row(r));
            b = b.cwiseMax(train.locations().row(r));
          }
          box = std::make_pair(a, b);
        }
      } else {
        box = read_box(dj, "domain");
        const auto bx = *box;
        s.domain = DomainMask::where(train, [&](Eigen::Index i) {
          const Eigen::RowVectorXd x = train.locations().row(i);
          return (x.array() >= bx.first.array()).all() && (x.array() <= bx.second.array()).all();
        });
      }
    }
    if (mj.contains("coverage")) box = read_box(mj.at("coverage"), "coverage");
    if (box) {
      const auto bx = *box;
      s.coverage = [bx](const Eigen::RowVectorXd& x, const std::string&) {
        return (x.array() >= bx.first.array()).all() && (x.array() <= bx.second.array()).all();
      };
    } else if (s.domain && s.domain->empty()) {
      s.coverage = [](const Eigen::RowVectorXd&, const std::string&) { return false; };
    }
    if (mj.contains("prior_weight")) {
      const auto& w = mj.at("prior_weight");
      if (!w.is_number() || w.get<double>() < 0.0) p.fail("prior_weight", "expected a non-negative number");
      s.prior_model_weight = w.get<double>();
      any_weight = true;
    } else {
      all_weight = false;
    }
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(p.path + "." + e.location, e.message);
    }
    specs.push_back(std::move(s));
  }
  if (any_weight && !all_weight) throw ConfigError("pipeline.models", "give prior_weight for every model or for none");
  if (!any_weight) {
    for (auto& s : specs) s.prior_model_weight = 1.0 / static_cast<double>(specs.size());
  } else {
    double total = 0.0;
    for (const auto& s : specs) total += s.prior_model_weight;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("pipeline.models", "prior weights must sum to 1");
  }
  return specs;
}

void finalize_outputs(OutputBundle& outputs, const ExperimentConfig& config, const std::string& command) {
  json cj = to_json(config);
  cj.erase("output_dir");  // where a run is written does not change what it computes
  outputs.add_json("manifest.json", make_manifest(config.seed, cj, command, outputs));
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, PipelineStage last) {
  const json& pj = cfg.pipeline;
  if (!pj.is_object() || pj.empty()) throw ConfigError("pipeline", "missing pipeline section");
  check_keys(pj, "pipeline", {"data", "test", "models"});
  auto resolve = [&](const char* key) {
    const auto& v = pj.at(key);
    if (!v.is_string()) throw ConfigError(std::string("pipeline.") + key, "expected a path");
    std::filesystem::path f = v.get<std::string>();
    return f.is_relative() ? cfg.base_dir / f : f;
  };
  if (!pj.contains("data")) throw ConfigError("pipeline.data", "missing");
  if (!pj.contains("models")) throw ConfigError("pipeline.models", "missing");

  PipelineResult res;
  res.train = read_dataset_csv(resolve("data"));
  res.has_test = pj.contains("test");
  res.query = res.has_test ? read_dataset_csv(resolve("test")) : res.train;
  if (res.query.dim() != res.train.dim()) throw ConfigError("pipeline.test", "input dimension differs from training data");
  std::vector<const Dataset*> sets = {&res.train};
  if (res.has_test) sets.push_back(&res.query);
  res.specs = models_from_json(pj.at("models"), sets, cfg.base_dir);
  const auto& specs = res.specs;
  const std::size_t K = specs.size();
  const auto Ki = static_cast<Eigen::Index>(K);
  const Dataset& train = res.train;
  const RngHandle root{cfg.seed, 0};

  const DomainPartition part = build_partition(specs, train);
  bool full_domains = true;
  for (const auto& m : part.masks) full_domains = full_domains && m.size() == static_cast<std::size_t>(train.size());
  if (cfg.mode == WeightMode::Classical && !full_domains) {
    throw ConfigError("mode", "classical weighting needs every model defined on the whole dataset; "
                              "use independent-domains or domain-corrected");
  }

  json summary = {{"experiment", "pipeline"},
                  {"seed", cfg.seed},
                  {"mode", to_string(cfg.mode)},
                  {"stage", to_string(last)},
                  {"n_train", train.size()},
                  {"warnings", part.warnings}};
  json classes = json::array();
  for (const auto& c : part.classes) {
    json names = json::array();
    for (auto k : c) names.push_back(specs[k].name);
    classes.push_back(names);
  }
  summary["classes"] = classes;

  // calibrate
  std::vector<std::future<PosteriorSamples>> futures;
  for (std::size_t k = 0; k < K; ++k) {
    futures.push_back(std::async(std::launch::async, [&, k] {
      return sample_posterior(specs[k], train, part.masks[k], cfg.chain, root.split(10).split(k));
    }));
  }
  std::vector<PosteriorSamples> samples;
  for (auto& f : futures) samples.push_back(f.get());
  json models = json::array();
  for (std::size_t k = 0; k < K; ++k) {
    json pm = json::object();
    for (std::size_t i = 0; i < specs[k].parameters.size(); ++i) {
      pm[specs[k].parameters[i].name] = samples[k].size() ? samples[k].draws.col(static_cast<Eigen::Index>(i)).mean() : 0.0;
    }
    models.push_back({{"name", specs[k].name},
                      {"n_domain", part.masks[k].size()},
                      {"acceptance_rate", samples[k].acceptance_rate},
                      {"posterior_mean", pm}});
    std::vector<std::string> names;
    for (const auto& p : specs[k].parameters) names.push_back(p.name);
    std::ostringstream trace;
    write_trace_csv(trace, samples[k], names);
    res.outputs.add("trace_" + specs[k].name + ".csv", trace.str());
  }

  auto finish = [&]() {
    summary["models"] = models;
    res.summary = summary;
    res.outputs.add_json("summary.json", summary);
    return res;
  };
  if (last == PipelineStage::Calibrate) return finish();

  // evidence
  Eigen::VectorXd log_ev(Ki), prior(Ki);
  res.log_evidence_se.resize(Ki);
  for (std::size_t k = 0; k < K; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    EvidenceEstimate e;
    if (cfg.evidence_method == EvidenceMethod::Laplace) {
      e = evidence_laplace(specs[k], train, part.masks[k]);
    } else {
      e = evidence_prior_mc(specs[k], train, part.masks[k], cfg.evidence_draws, root.split(11).split(k));
    }
    log_ev[ki] = e.log_evidence;
    res.log_evidence_se[ki] = e.mc_standard_error;
    prior[ki] = specs[k].prior_model_weight;
    models[k]["log_evidence"] = json_number(e.log_evidence);
    models[k]["log_evidence_se"] = json_number(e.mc_standard_error);
    models[k]["evidence_degenerate"] = e.degenerate;
  }
  summary["evidence_method"] = to_string(cfg.evidence_method);
  if (last == PipelineStage::Evidence) return finish();

  // weights
  Eigen::VectorXd corrections = Eigen::VectorXd::Zero(Ki);
  if (cfg.mode == WeightMode::DomainCorrected) {
    PosteriorCache cache(specs, train, cfg.correction_chain, root.split(12), cfg.correction_prior_draws);
    for (std::size_t k = 0; k < K; ++k) cache.put(k, part.masks[k], samples[k]);
    CorrectionSettings cs = correction_settings(cfg, root.split(15));
    cs.mixing_weights = posterior_model_weights(prior, log_ev, corrections).posterior_weights;
    const CorrectionLedger ledger = corrective_factor_general(part, specs, train, cache, cs);
    corrections = ledger.log_factors;
    summary["correction"] = to_json(ledger, specs);
  }
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  res.ensemble = posterior_model_weights(prior, log_ev, corrections, names);
  const Eigen::VectorXd& w = res.ensemble.posterior_weights;
  for (std::size_t k = 0; k < K; ++k) {
    models[k]["log_correction"] = json_number(corrections[static_cast<Eigen::Index>(k)]);
    models[k]["weight"] = json_number(w[static_cast<Eigen::Index>(k)]);
  }
  summary["ensemble"] = to_json(res.ensemble);
  res.outputs.add("weights.csv", weights_csv(res.ensemble, res.log_evidence_se));
  if (last == PipelineStage::Weights) return finish();

  // predict
  const Dataset& q = res.query;
  std::vector<Eigen::MatrixXd> draws;
  std::vector<PredictiveMoments> moments;
  for (std::size_t k = 0; k < K; ++k) {
    draws.push_back(posterior_predictive(specs[k], samples[k], train, q.locations(), q.observable(), root.split(13).split(k)));
    moments.push_back(posterior_predictive_moments(specs[k], samples[k], train, q.locations(), q.observable()));
  }
  Rng mix_rng(root.split(14));
  const LocalMixture mix = local_mixture_predict(w, specs, draws, q.locations(), q.observable(), cfg.predictive_draws, mix_rng);
  const LocalMoments lm = local_mixture_moments(w, specs, moments, q.locations(), q.observable());
  std::ostringstream pred;
  pred << "x,mean,sd,series,truth,id\n";
  auto row = [&](Eigen::Index j, double m, double var, const std::string& series) {
    pred << format_double(q.locations()(j, 0)) << ',' << format_double(m) << ',' << format_double(std::sqrt(var)) << ','
         << series << ',' << format_double(q.values()[j]) << ',' << q.ids()[static_cast<std::size_t>(j)] << '\n';
  };
  for (std::size_t k = 0; k < K; ++k) {
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (specs[k].covers(q.locations().row(j), q.observable()[static_cast<std::size_t>(j)])) {
        row(j, moments[k].mean[j], moments[k].variance[j], specs[k].name);
      }
    }
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) row(j, lm.mean[j], lm.variance[j], "BMA");
  res.outputs.add("predictions.csv", pred.str());
  summary["prediction_set"] = res.has_test ? "test" : "training";
  if (last == PipelineStage::Predict) return finish();

  // diagnose: each model over the points it covers, BMA over all of them
  std::ostringstream diag;
  diag << "model,rmse,r2_hat,n_points\n";
  json dj = json::object();
  const double bma_rmse = rmse(lm.mean, q.values());
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (specs[k].covers(q.locations().row(j), q.observable()[static_cast<std::size_t>(j)])) cols.push_back(j);
    }
    if (cols.empty()) continue;
    Eigen::VectorXd mk(static_cast<Eigen::Index>(cols.size())), bk(mk.size()), yk(mk.size());
    Eigen::MatrixXd dk(draws[k].rows(), mk.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      mk[ci] = moments[k].mean[cols[c]];
      bk[ci] = lm.mean[cols[c]];
      yk[ci] = q.values()[cols[c]];
      dk.col(ci) = draws[k].col(cols[c]);
    }
    const double r_model = rmse(mk, yk);
    const double r_bma = rmse(bk, yk);
    const double r2 = r_model > 0.0 ? r2_hat(r_bma, Eigen::VectorXd::Constant(1, r_model))[0] : 0.0;
    const CoverageCurve ecp = ecp_curve(dk, yk);
    res.outputs.add("ecp_" + specs[k].name + ".csv", ecp_csv(ecp));
    diag << specs[k].name << ',' << format_double(r_model) << ',' << format_double(r2) << ',' << cols.size() << '\n';
    dj[specs[k].name] = {{"rmse", r_model}, {"bma_rmse_same_points", r_bma}, {"r2_hat", r2},
                         {"ecp_mad", ecp.mean_abs_deviation()}, {"n_points", cols.size()}};
  }
  const CoverageCurve bma_ecp = ecp_curve(mix.draws, q.values());
  res.outputs.add("ecp_BMA.csv", ecp_csv(bma_ecp));
  diag << "BMA," << format_double(bma_rmse) << ",0," << q.size() << '\n';
  dj["BMA"] = {{"rmse", bma_rmse}, {"ecp_mad", bma_ecp.mean_abs_deviation()}, {"n_points", q.size()}};
  res.outputs.add("diagnostics.csv", diag.str());
  summary["diagnostics"] = dj;
  return finish();
}

}  // namespace bma
