#include "bma/experiments.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include "bma/errors.hpp"

namespace bma {

using nlohmann::json;

std::string to_string(WeightMode m) {
  switch (m) {
    case WeightMode::Classical: return "classical";
    case WeightMode::IndependentDomains: return "independent-domains";
    case WeightMode::DomainCorrected: return "domain-corrected";
  }
  return "classical";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "classical") return WeightMode::Classical;
  if (s == "independent-domains") return WeightMode::IndependentDomains;
  if (s == "domain-corrected") return WeightMode::DomainCorrected;
  throw ConfigError("mode", "expected classical|independent-domains|domain-corrected, got '" + s + "'");
}

// ---------------------------------------------------------------- config

namespace {

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
  }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

void read_count(const json& j, const char* key, const std::string& path, Eigen::Index& out, Eigen::Index min = 0) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < min) {
    throw ConfigError(join(path, key), "expected an integer >= " + std::to_string(min));
  }
  out = static_cast<Eigen::Index>(v.get<long long>());
}

void read_real(const json& j, const char* key, const std::string& path, double& out, bool positive = false) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  out = v.get<double>();
  if (!std::isfinite(out) || (positive && !(out > 0.0))) {
    throw ConfigError(join(path, key), positive ? "expected a positive number" : "expected a finite number");
  }
}

void read_string(const json& j, const char* key, const std::string& path, std::string& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  out = j.at(key).get<std::string>();
}

json chain_json(const ChainSettings& c) {
  return {{"n_samples", c.n_samples},
          {"burn_in", c.burn_in},
          {"thin", c.thin},
          {"initial_scale", c.initial_scale},
          {"target_acceptance", c.target_acceptance}};
}

void read_chain(const json& j, const std::string& path, ChainSettings& c,
                std::initializer_list<const char*> extra_keys = {}) {
  std::vector<const char*> keys = {"n_samples", "burn_in", "thin", "initial_scale", "target_acceptance"};
  keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError(path + "." + k, "unknown key");
  }
  read_count(j, "n_samples", path, c.n_samples, 1);
  read_count(j, "burn_in", path, c.burn_in, 0);
  read_count(j, "thin", path, c.thin, 1);
  read_real(j, "initial_scale", path, c.initial_scale, true);
  read_real(j, "target_acceptance", path, c.target_acceptance, true);
  if (c.target_acceptance >= 1.0) throw ConfigError(path + ".target_acceptance", "must lie in (0, 1)");
}

MixingMode mixing_from_string(const std::string& s, const std::string& path) {
  if (s == "prior") return MixingMode::Prior;
  if (s == "posterior") return MixingMode::Posterior;
  throw ConfigError(path, "expected prior|posterior, got '" + s + "'");
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json q = {{"d_shared", c.quadratic.d_shared},
            {"theta_prior_sd", c.quadratic.theta_prior_sd},
            {"noise_sd", c.quadratic.noise_sd},
            {"sigma_prior_scale", c.quadratic.sigma_prior_scale},
            {"eval_abs_max", c.quadratic.eval_abs_max},
            {"surrogate", c.quadratic.surrogate}};
  q["sigma"] = c.quadratic.sigma ? json(*c.quadratic.sigma) : json("free");
  json corr = chain_json(c.correction_chain);
  corr["mixing"] = to_string(c.mixing);
  corr["estimator"] = to_string(c.correction_estimator);
  corr["prior_draws"] = c.correction_prior_draws;
  return {{"experiment", c.experiment},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"output_dir", c.output_dir},
          {"chain", chain_json(c.chain)},
          {"evidence", {{"method", to_string(c.evidence_method)}, {"n_draws", c.evidence_draws}}},
          {"correction", corr},
          {"predictive_draws", c.predictive_draws},
          {"proton",
           {{"n", c.proton.n}, {"n_train", c.proton.n_train}, {"sigma_prior_scale", c.proton.sigma_prior_scale}}},
          {"quadratic", q},
          {"pipeline", c.pipeline}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "", {"experiment", "seed", "mode", "output_dir", "chain", "evidence", "correction", "predictive_draws",
                     "proton", "quadratic", "pipeline"});
  read_string(j, "experiment", "", c.experiment);
  if (c.experiment != "proton" && c.experiment != "quadratic" && c.experiment != "pipeline") {
    throw ConfigError("experiment", "expected proton|quadratic|pipeline, got '" + c.experiment + "'");
  }
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("mode")) {
    std::string m;
    read_string(j, "mode", "", m);
    c.mode = weight_mode_from_string(m);
  }
  read_string(j, "output_dir", "", c.output_dir);
  if (j.contains("chain")) read_chain(j.at("chain"), "chain", c.chain);
  if (j.contains("evidence")) {
    const auto& e = j.at("evidence");
    check_keys(e, "evidence", {"method", "n_draws"});
    if (e.contains("method")) {
      std::string m;
      read_string(e, "method", "evidence", m);
      try {
        c.evidence_method = evidence_method_from_string(m);
      } catch (const std::exception&) {
        throw ConfigError("evidence.method", "expected prior-MC|Laplace, got '" + m + "'");
      }
    }
    read_count(e, "n_draws", "evidence", c.evidence_draws, 1);
  }
  if (j.contains("correction")) {
    const auto& e = j.at("correction");
    read_chain(e, "correction", c.correction_chain, {"mixing", "estimator", "prior_draws"});
    if (e.contains("estimator")) {
      std::string m;
      read_string(e, "estimator", "correction", m);
      try {
        c.correction_estimator = local_estimator_from_string(m);
      } catch (const std::exception&) {
        throw ConfigError("correction.estimator", "expected posterior-draws|evidence-ratio, got '" + m + "'");
      }
    }
    if (e.contains("mixing")) {
      std::string m;
      read_string(e, "mixing", "correction", m);
      c.mixing = mixing_from_string(m, "correction.mixing");
    }
    read_count(e, "prior_draws", "correction", c.correction_prior_draws, 1);
  }
  read_count(j, "predictive_draws", "", c.predictive_draws, 1);
  if (j.contains("proton")) {
    const auto& p = j.at("proton");
    check_keys(p, "proton", {"n", "n_train", "sigma_prior_scale"});
    read_count(p, "n", "proton", c.proton.n, 2);
    read_count(p, "n_train", "proton", c.proton.n_train, 1);
    read_real(p, "sigma_prior_scale", "proton", c.proton.sigma_prior_scale, true);
    if (c.proton.n_train >= c.proton.n) throw ConfigError("proton.n_train", "must be smaller than proton.n");
  }
  if (j.contains("quadratic")) {
    const auto& q = j.at("quadratic");
    check_keys(q, "quadratic", {"d_shared", "theta_prior_sd", "noise_sd", "sigma", "sigma_prior_scale", "eval_abs_max",
                                "surrogate"});
    if (q.contains("d_shared")) {
      const auto& d = q.at("d_shared");
      if (!d.is_array() || d.empty()) throw ConfigError("quadratic.d_shared", "expected a non-empty array");
      c.quadratic.d_shared.clear();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d[i].is_number()) throw ConfigError("quadratic.d_shared[" + std::to_string(i) + "]", "expected a number");
        c.quadratic.d_shared.push_back(d[i].get<double>());
      }
    }
    read_real(q, "theta_prior_sd", "quadratic", c.quadratic.theta_prior_sd, true);
    read_real(q, "noise_sd", "quadratic", c.quadratic.noise_sd, true);
    read_real(q, "sigma_prior_scale", "quadratic", c.quadratic.sigma_prior_scale, true);
    read_real(q, "eval_abs_max", "quadratic", c.quadratic.eval_abs_max, true);
    if (q.contains("sigma")) {
      const auto& s = q.at("sigma");
      if (s.is_string() && s.get<std::string>() == "free") {
        c.quadratic.sigma.reset();
      } else if (s.is_number() && s.get<double>() > 0.0) {
        c.quadratic.sigma = s.get<double>();
      } else {
        throw ConfigError("quadratic.sigma", "expected \"free\" or a positive number");
      }
    }
    read_string(q, "surrogate", "quadratic", c.quadratic.surrogate);
    if (c.quadratic.surrogate != "exact" && c.quadratic.surrogate != "gp-emulator") {
      throw ConfigError("quadratic.surrogate", "expected exact|gp-emulator");
    }
  }
  if (j.contains("pipeline")) {
    if (!j.at("pipeline").is_object()) throw ConfigError("pipeline", "expected an object");
    c.pipeline = j.at("pipeline");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col), "invalid JSON");
  }
  try {
    ExperimentConfig c = config_from_json(j);
    c.base_dir = path.parent_path();
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.location, e.message);
  }
}

// ---------------------------------------------------------------- shared

namespace {

EvidenceEstimate compute_evidence(const ExperimentConfig& cfg, const ModelSpec& spec, const Dataset& data,
                                  const DomainMask& subset, RngHandle rng) {
  if (cfg.evidence_method == EvidenceMethod::Laplace) return evidence_laplace(spec, data, subset);
  return evidence_prior_mc(spec, data, subset, cfg.evidence_draws, rng);
}

std::string predictions_header(bool with_scheme) {
  return with_scheme ? "d_shared,x,mean,sd,series,truth\n" : "x,mean,sd,series,truth\n";
}

std::vector<std::string> model_names(const std::vector<ModelSpec>& specs) {
  std::vector<std::string> n;
  for (const auto& s : specs) n.push_back(s.name);
  return n;
}

}  // namespace

CorrectionSettings correction_settings(const ExperimentConfig& cfg, RngHandle evidence_rng) {
  CorrectionSettings cs;
  cs.mixing = cfg.mixing;
  cs.estimator = cfg.correction_estimator;
  cs.evidence_draws = cfg.evidence_draws;
  cs.evidence_rng = evidence_rng;
  return cs;
}

std::string weights_csv(const WeightedEnsemble& e, const Eigen::VectorXd& log_evidence_se) {
  std::ostringstream out;
  out << "model,prior_weight,log_evidence,log_evidence_se,log_correction,weight\n";
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    out << e.names[static_cast<std::size_t>(k)] << ',' << format_double(e.prior_weights[k]) << ','
        << format_double(e.log_evidences[k]) << ',' << format_double(log_evidence_se[k]) << ','
        << format_double(e.corrective_log_factors[k]) << ',' << format_double(e.posterior_weights[k]) << '\n';
  }
  return out.str();
}

std::string ecp_csv(const CoverageCurve& c) {
  std::ostringstream out;
  write_ecp_csv(out, c);
  return out.str();
}

// ---------------------------------------------------------------- proton

double ProtonConstants::radius() const { return std::cbrt(mass) * 1.25; }

double woods_saxon(double r, const ProtonConstants& c) {
  return -c.v_ws / (1.0 + std::exp((r - c.radius()) / c.a));
}

double coulomb(double r, const ProtonConstants& c) { return -c.v_c * c.z / r; }

ProtonData gen_proton_data(std::uint64_t seed, Eigen::Index n, Eigen::Index n_train, const ProtonConstants& c) {
  if (n < 1) throw UsageError("gen_proton_data: n must be positive");
  if (n_train < 0 || n_train > n) throw UsageError("gen_proton_data: n_train outside [0, n]");
  const RngHandle root{seed, 0};
  Rng rng(root.split(1));
  const double lo = c.radius(), hi = 10.0;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  std::vector<std::string> ids, obs(static_cast<std::size_t>(n), "y");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = lo + (hi - lo) * rng.uniform();
    X(i, 0) = r;
    y[i] = 0.5 * woods_saxon(r, c) + 0.5 * coulomb(r, c) + rng.normal();
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%03lld", static_cast<long long>(i));
    ids.emplace_back(buf);
  }
  ProtonData d;
  d.all = Dataset(X, y, obs, ids);
  // Fisher-Yates on a separate stream decides the split.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng split(root.split(2));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[split.index(i)]);
  std::vector<Eigen::Index> tr(perm.begin(), perm.begin() + n_train), te(perm.begin() + n_train, perm.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  d.train = d.all.select(tr);
  d.test = d.all.select(te);
  return d;
}

std::vector<ModelSpec> proton_models(double sigma_prior_scale, const ProtonConstants& c) {
  auto make = [&](const std::string& name, double (*v)(double, const ProtonConstants&)) {
    ModelSpec m;
    m.name = name;
    m.response.fn = [v, c](const Eigen::MatrixXd& X, const Eigen::VectorXd&) {
      Eigen::VectorXd out(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = v(X(i, 0), c);
      return out;
    };
    m.parameters = {{"sigma", Prior::half_normal(sigma_prior_scale)}};
    m.noise.fallback = Quantity::parameter(0);
    m.prior_model_weight = 0.5;
    return m;
  };
  return {make("M1", woods_saxon), make("M2", coulomb)};
}

ProtonResult run_proton_experiment(const ExperimentConfig& cfg) {
  const RngHandle root{cfg.seed, 0};
  const ProtonData pd = gen_proton_data(cfg.seed, cfg.proton.n, cfg.proton.n_train);
  const std::vector<ModelSpec> specs = proton_models(cfg.proton.sigma_prior_scale);
  const auto K = static_cast<Eigen::Index>(specs.size());
  const DomainMask train_all = DomainMask::all(pd.train);

  std::vector<std::future<PosteriorSamples>> futures;
  for (Eigen::Index k = 0; k < K; ++k) {
    futures.push_back(std::async(std::launch::async, [&, k] {
      return sample_posterior(specs[static_cast<std::size_t>(k)], pd.train, train_all, cfg.chain,
                              root.split(10).split(static_cast<std::uint64_t>(k)));
    }));
  }
  Eigen::VectorXd log_ev(K), log_ev_se(K), prior(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto e = compute_evidence(cfg, specs[static_cast<std::size_t>(k)], pd.train, train_all,
                                    root.split(11).split(static_cast<std::uint64_t>(k)));
    log_ev[k] = e.log_evidence;
    log_ev_se[k] = e.mc_standard_error;
    prior[k] = specs[static_cast<std::size_t>(k)].prior_model_weight;
  }
  std::vector<PosteriorSamples> samples;
  for (auto& f : futures) samples.push_back(f.get());

  Eigen::VectorXd corrections = Eigen::VectorXd::Zero(K);
  json correction_json;
  if (cfg.mode == WeightMode::DomainCorrected) {
    const DomainPartition part = build_partition(specs, pd.train);
    PosteriorCache cache(specs, pd.train, cfg.correction_chain, root.split(12), cfg.correction_prior_draws);
    CorrectionSettings cs = correction_settings(cfg, root.split(15));
    cs.mixing_weights = posterior_model_weights(prior, log_ev, corrections).posterior_weights;
    const CorrectionLedger ledger = corrective_factor_general(part, specs, pd.train, cache, cs);
    corrections = ledger.log_factors;
    correction_json = to_json(ledger, specs);
  }

  ProtonResult res;
  res.ensemble = posterior_model_weights(prior, log_ev, corrections, model_names(specs));
  res.log_evidence_se = log_ev_se;
  const Eigen::VectorXd& w = res.ensemble.posterior_weights;

  const Eigen::MatrixXd& Xt = pd.test.locations();
  const auto& obs = pd.test.observable();
  const Eigen::VectorXd& yt = pd.test.values();
  std::vector<Eigen::MatrixXd> draws;
  std::vector<PredictiveMoments> moments;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& spec = specs[static_cast<std::size_t>(k)];
    draws.push_back(posterior_predictive(spec, samples[static_cast<std::size_t>(k)], pd.train, Xt, obs,
                                         root.split(13).split(static_cast<std::uint64_t>(k))));
    moments.push_back(posterior_predictive_moments(spec, samples[static_cast<std::size_t>(k)], pd.train, Xt, obs));
  }
  Rng mix_rng(root.split(14));
  std::vector<Eigen::Index> labels;
  const Eigen::MatrixXd mixture = bma_mixture_draws(w, draws, cfg.predictive_draws, mix_rng, &labels);

  const Eigen::Index nt = yt.size();
  Eigen::VectorXd bma_mean_v(nt), bma_sd(nt);
  for (Eigen::Index j = 0; j < nt; ++j) {
    Eigen::VectorXd m(K), v(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      m[k] = moments[static_cast<std::size_t>(k)].mean[j];
      v[k] = moments[static_cast<std::size_t>(k)].variance[j];
    }
    bma_mean_v[j] = bma_mean(w, m);
    bma_sd[j] = std::sqrt(bma_variance(w, m, v).total());
  }

  res.model_rmse.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) res.model_rmse[k] = rmse(moments[static_cast<std::size_t>(k)].mean, yt);
  res.bma_rmse = rmse(bma_mean_v, yt);
  res.r2 = r2_hat(res.bma_rmse, res.model_rmse);
  for (Eigen::Index k = 0; k < K; ++k) res.model_ecp.push_back(ecp_curve(draws[static_cast<std::size_t>(k)], yt));
  res.bma_ecp = ecp_curve(mixture, yt);

  // PMSE diagnostics per test point from the labelled mixture.
  Eigen::MatrixXd grid(101, 2);
  for (int i = 0; i <= 100; ++i) grid.row(i) << i / 100.0, 1.0 - i / 100.0;
  double mean_bma_pmse = 0.0, mean_r2 = 0.0;
  Eigen::VectorXd mean_model_pmse = Eigen::VectorXd::Zero(K);
  json first_report;
  for (Eigen::Index j = 0; j < nt; ++j) {
    Eigen::VectorXd fallback(K);
    for (Eigen::Index k = 0; k < K; ++k) fallback[k] = moments[static_cast<std::size_t>(k)].mean[j];
    const PmseReport rep = pmse_report(w, mixture.col(j), labels, fallback, grid);
    mean_bma_pmse += rep.bma_pmse.value / static_cast<double>(nt);
    mean_model_pmse += rep.model_pmse / static_cast<double>(nt);
    mean_r2 += rep.r2_bma / static_cast<double>(nt);
    if (j == 0) first_report = to_json(rep);
  }

  json models = json::array();
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    models.push_back({{"name", specs[static_cast<std::size_t>(k)].name},
                      {"log_evidence", json_number(log_ev[k])},
                      {"log_evidence_se", json_number(log_ev_se[k])},
                      {"weight", json_number(w[k])},
                      {"rmse", res.model_rmse[k]},
                      {"r2_hat", res.r2[k]},
                      {"ecp_mad", res.model_ecp[static_cast<std::size_t>(k)].mean_abs_deviation()},
                      {"acceptance_rate", s.acceptance_rate},
                      {"posterior_mean_sigma", s.draws.col(0).mean()}});
  }
  res.summary = {{"experiment", "proton"},
                 {"seed", cfg.seed},
                 {"mode", to_string(cfg.mode)},
                 {"evidence_method", to_string(cfg.evidence_method)},
                 {"n_train", pd.train.size()},
                 {"n_test", pd.test.size()},
                 {"models", models},
                 {"bma", {{"rmse", res.bma_rmse}, {"ecp_mad", res.bma_ecp.mean_abs_deviation()}}},
                 {"ensemble", to_json(res.ensemble)},
                 {"pmse",
                  {{"mean_bma_pmse", mean_bma_pmse},
                   {"mean_model_pmse", json_vector(mean_model_pmse)},
                   {"mean_r2_bma", mean_r2},
                   {"first_test_point", first_report}}}};
  if (!correction_json.is_null()) res.summary["correction"] = correction_json;

  std::ostringstream pred;
  pred << predictions_header(false);
  auto row = [&](Eigen::Index j, double m, double sd, const std::string& series) {
    pred << format_double(Xt(j, 0)) << ',' << format_double(m) << ',' << format_double(sd) << ',' << series << ','
         << format_double(yt[j]) << '\n';
  };
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& mo = moments[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < nt; ++j) row(j, mo.mean[j], std::sqrt(mo.variance[j]), specs[static_cast<std::size_t>(k)].name);
  }
  for (Eigen::Index j = 0; j < nt; ++j) row(j, bma_mean_v[j], bma_sd[j], "BMA");

  std::ostringstream train_csv, test_csv;
  write_dataset_csv(train_csv, pd.train);
  write_dataset_csv(test_csv, pd.test);
  res.outputs.add_json("summary.json", res.summary);
  res.outputs.add("weights.csv", weights_csv(res.ensemble, log_ev_se));
  for (Eigen::Index k = 0; k < K; ++k) {
    res.outputs.add("ecp_" + specs[static_cast<std::size_t>(k)].name + ".csv", ecp_csv(res.model_ecp[static_cast<std::size_t>(k)]));
  }
  res.outputs.add("ecp_BMA.csv", ecp_csv(res.bma_ecp));
  res.outputs.add("predictions.csv", pred.str());
  res.outputs.add("data_train.csv", train_csv.str());
  res.outputs.add("data_test.csv", test_csv.str());
  return res;
}

// ---------------------------------------------------------------- quadratic

QuadraticScheme quadratic_scheme(double d_shared, const Dataset& data) {
  struct Row {
    double d;
    int lo1, hi1, lo2, hi2;
    bool symmetric;
  };
  static const Row table[] = {
      {0.2, -9, 1, -1, 9, true},  {0.3, -9, 1, -2, 8, false}, {0.4, -8, 2, -2, 8, true}, {0.5, -8, 2, -3, 7, false},
      {0.6, -7, 3, -3, 7, true},  {0.7, -7, 3, -4, 6, false}, {0.8, -6, 4, -4, 6, true},
  };
  for (const auto& r : table) {
    if (std::abs(r.d - d_shared) > 1e-9) continue;
    QuadraticScheme s;
    s.d_shared = r.d;
    s.symmetric = r.symmetric;
    s.lo[0] = r.lo1;
    s.hi[0] = r.hi1;
    s.lo[1] = r.lo2;
    s.hi[1] = r.hi2;
    for (int k = 0; k < 2; ++k) {
      s.masks[k] = DomainMask::where(data, [&, k](Eigen::Index i) {
        const double x = data.locations()(i, 0);
        return x >= s.lo[k] && x <= s.hi[k];
      });
    }
    return s;
  }
  throw ConfigError("quadratic.d_shared", "no mask scheme for D_shared = " + format_double(d_shared));
}

QuadraticData gen_quadratic_data(std::uint64_t seed, double noise_sd, const std::vector<double>& d_shared) {
  Rng rng(RngHandle{seed, 0}.split(1));
  Eigen::MatrixXd X(18, 1);
  Eigen::VectorXd y(18);
  std::vector<std::string> ids, obs(18, "y");
  Eigen::Index i = 0;
  for (int x = -9; x <= 9; ++x) {
    if (x == 0) continue;
    X(i, 0) = x;
    y[i] = rng.normal(0.0, noise_sd);
    ids.push_back("x" + std::to_string(x));
    ++i;
  }
  QuadraticData q;
  q.data = Dataset(X, y, obs, ids);
  for (double d : d_shared) q.schemes.push_back(quadratic_scheme(d, q.data));
  return q;
}

std::vector<ModelSpec> quadratic_models(const QuadraticScheme& scheme, const ExperimentConfig::Quadratic& q) {
  std::vector<ModelSpec> out;
  const double alpha[2] = {0.5, -0.5};
  for (int k = 0; k < 2; ++k) {
    ModelSpec m;
    m.name = "M" + std::to_string(k + 1);
    const double a = alpha[k];
    ResponseFn exact = [a](const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
      return Eigen::VectorXd((a * X.col(0).array().square() + theta[0]).matrix());
    };
    if (q.surrogate == "gp-emulator") {
      // Runs on an x-by-theta design; the linearized mean is exact here, so
      // the emulator's GP correction stays near zero.
      const int nx = 19, nt = 5;
      Eigen::MatrixXd rx(nx * nt, 1), rt(nx * nt, 1);
      Eigen::VectorXd ro(nx * nt);
      int r = 0;
      for (int xi = 0; xi < nx; ++xi) {
        for (int ti = 0; ti < nt; ++ti, ++r) {
          rx(r, 0) = -9.0 + xi;
          rt(r, 0) = -3.0 * q.theta_prior_sd + ti * 1.5 * q.theta_prior_sd;
          ro[r] = exact(rx.row(r), rt.row(r).transpose())[0];
        }
      }
      SqExpKernelParams kp;
      kp.eta = 1.0;
      kp.length_scales = Eigen::Vector2d(3.0, q.theta_prior_sd);
      GpEmulator emu(rx, rt, ro, linearized_response(exact, Eigen::VectorXd::Zero(1)), kp);
      m.response.fn = emu.as_response();
    } else {
      m.response.fn = exact;
    }
    m.response.theta_index = {0};
    m.parameters.push_back({"theta", Prior::normal(0.0, q.theta_prior_sd)});
    if (q.sigma) {
      m.noise.fallback = Quantity::constant(*q.sigma);
    } else {
      m.parameters.push_back({"sigma", Prior::half_normal(q.sigma_prior_scale)});
      m.noise.fallback = Quantity::parameter(1);
    }
    m.domain = scheme.masks[k];
    const double lo = scheme.lo[k], hi = scheme.hi[k];
    m.coverage = [lo, hi](const Eigen::RowVectorXd& x, const std::string&) { return x[0] >= lo && x[0] <= hi; };
    m.prior_model_weight = 0.5;
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

QuadraticSchemeResult run_scheme(const ExperimentConfig& cfg, const Dataset& full, const QuadraticScheme& scheme) {
  const RngHandle root = RngHandle{cfg.seed, 0}.split(100 + static_cast<std::uint64_t>(std::llround(scheme.d_shared * 100)));
  QuadraticSchemeResult res;
  res.scheme = scheme;
  const std::vector<ModelSpec> specs = quadratic_models(scheme, cfg.quadratic);

  // The scheme's dataset is the union of the two masks.
  const DomainMask uni = scheme.masks[0] | scheme.masks[1];
  const auto rows = uni.rows(full);
  const Dataset data = full.select(rows);

  Eigen::VectorXd prior(2);
  prior << specs[0].prior_model_weight, specs[1].prior_model_weight;
  res.log_evidence.resize(2);
  res.log_evidence_se.resize(2);
  std::vector<PosteriorSamples> samples;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto e = compute_evidence(cfg, specs[k], data, scheme.masks[k], root.split(1).split(k));
    res.log_evidence[static_cast<Eigen::Index>(k)] = e.log_evidence;
    res.log_evidence_se[static_cast<Eigen::Index>(k)] = e.mc_standard_error;
    samples.push_back(sample_posterior(specs[k], data, scheme.masks[k], cfg.chain, root.split(2).split(k)));
  }

  const DomainPartition part = build_partition(specs, data);
  PosteriorCache cache(specs, data, cfg.correction_chain, root.split(3), cfg.correction_prior_draws);
  CorrectionSettings cs = correction_settings(cfg, root.split(4));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const WeightedEnsemble e0 = posterior_model_weights(prior, res.log_evidence, zero, model_names(specs));
  cs.mixing_weights = e0.posterior_weights;
  const CorrectionLedger ledger = corrective_factor_general(part, specs, data, cache, cs);
  res.log_correction = ledger.log_factors;
  res.log_correction_se = ledger.standard_errors;
  res.correction_ledger = to_json(ledger, specs);
  const WeightedEnsemble eq = posterior_model_weights(prior, res.log_evidence, res.log_correction, model_names(specs));
  res.weights_q0 = e0.posterior_weights;
  res.weights_q = eq.posterior_weights;
  res.log_q0 = res.log_evidence[0] - res.log_evidence[1];
  res.log_q = res.log_q0 + res.log_correction[0] - res.log_correction[1];

  // Evaluation points |x| <= eval_abs_max.
  std::vector<Eigen::Index> eval_rows;
  for (Eigen::Index i = 0; i < full.size(); ++i) {
    if (std::abs(full.locations()(i, 0)) <= cfg.quadratic.eval_abs_max) eval_rows.push_back(i);
  }
  const Dataset ev = full.select(eval_rows);
  res.eval_x = ev.locations().col(0);
  res.eval_y = ev.values();
  for (std::size_t k = 0; k < 2; ++k) {
    res.model_moments.push_back(
        posterior_predictive_moments(specs[k], samples[k], data, ev.locations(), ev.observable()));
  }
  res.bma_q0 = local_mixture_moments(res.weights_q0, specs, res.model_moments, ev.locations(), ev.observable());
  res.bma_q = local_mixture_moments(res.weights_q, specs, res.model_moments, ev.locations(), ev.observable());
  res.model_rmse.resize(2);
  for (std::size_t k = 0; k < 2; ++k) res.model_rmse[static_cast<Eigen::Index>(k)] = rmse(res.model_moments[k].mean, res.eval_y);
  res.rmse_bma_q0 = rmse(res.bma_q0.mean, res.eval_y);
  res.rmse_bma_q = rmse(res.bma_q.mean, res.eval_y);
  res.r2 = r2_hat(res.rmse_bma_q, res.model_rmse);
  return res;
}

json mask_json(const QuadraticScheme& s, int k) { return {{"lo", s.lo[k]}, {"hi", s.hi[k]}, {"n_points", s.masks[k].size()}}; }

}  // namespace

QuadraticResult run_quadratic_experiment(const ExperimentConfig& cfg) {
  const QuadraticData qd = gen_quadratic_data(cfg.seed, cfg.quadratic.noise_sd, cfg.quadratic.d_shared);
  std::vector<std::future<QuadraticSchemeResult>> futures;
  for (const auto& s : qd.schemes) {
    futures.push_back(std::async(std::launch::async, [&cfg, &qd, s] { return run_scheme(cfg, qd.data, s); }));
  }
  QuadraticResult out;
  for (auto& f : futures) out.schemes.push_back(f.get());

  const std::vector<std::string> series = {"M1", "M2", "BMA(Q0)", "BMA(Q)"};
  std::ostringstream pred, wcsv;
  pred << predictions_header(true);
  wcsv << "d_shared,model,prior_weight,log_evidence,log_evidence_se,log_correction,weight_q0,weight\n";
  json schemes = json::array();
  for (const auto& r : out.schemes) {
    const std::string d = format_double(r.scheme.d_shared);
    for (Eigen::Index k = 0; k < 2; ++k) {
      wcsv << d << ",M" << (k + 1) << ",0.5," << format_double(r.log_evidence[k]) << ','
           << format_double(r.log_evidence_se[k]) << ',' << format_double(r.log_correction[k]) << ','
           << format_double(r.weights_q0[k]) << ',' << format_double(r.weights_q[k]) << '\n';
    }
    auto emit = [&](const Eigen::VectorXd& mean, const Eigen::VectorXd& var, const std::string& name) {
      for (Eigen::Index j = 0; j < r.eval_x.size(); ++j) {
        pred << d << ',' << format_double(r.eval_x[j]) << ',' << format_double(mean[j]) << ','
             << format_double(std::sqrt(var[j])) << ',' << name << ',' << format_double(r.eval_y[j]) << '\n';
      }
    };
    emit(r.model_moments[0].mean, r.model_moments[0].variance, series[0]);
    emit(r.model_moments[1].mean, r.model_moments[1].variance, series[1]);
    emit(r.bma_q0.mean, r.bma_q0.variance, series[2]);
    emit(r.bma_q.mean, r.bma_q.variance, series[3]);

    schemes.push_back({{"d_shared", r.scheme.d_shared},
                       {"symmetric", r.scheme.symmetric},
                       {"masks", {{"M1", mask_json(r.scheme, 0)}, {"M2", mask_json(r.scheme, 1)}}},
                       {"log_evidence", json_vector(r.log_evidence)},
                       {"log_evidence_se", json_vector(r.log_evidence_se)},
                       {"log_correction", json_vector(r.log_correction)},
                       {"log_correction_se", json_vector(r.log_correction_se)},
                       {"log_q0", json_number(r.log_q0)},
                       {"log_q", json_number(r.log_q)},
                       {"q0", json_number(std::exp(r.log_q0))},
                       {"q", json_number(std::exp(r.log_q))},
                       {"weights_q0", json_vector(r.weights_q0)},
                       {"weights_q", json_vector(r.weights_q)},
                       {"rmse",
                        {{"M1", r.model_rmse[0]},
                         {"M2", r.model_rmse[1]},
                         {"BMA(Q0)", r.rmse_bma_q0},
                         {"BMA(Q)", r.rmse_bma_q}}},
                       {"r2_hat", json_vector(r.r2)},
                       {"correction", r.correction_ledger}});
  }
  out.summary = {{"experiment", "quadratic"},
                 {"seed", cfg.seed},
                 {"evidence_method", to_string(cfg.evidence_method)},
                 {"mixing", to_string(cfg.mixing)},
                 {"correction_estimator", to_string(cfg.correction_estimator)},
                 {"eval_abs_max", cfg.quadratic.eval_abs_max},
                 {"schemes", schemes}};
  std::ostringstream data_csv;
  write_dataset_csv(data_csv, qd.data);
  out.outputs.add_json("summary.json", out.summary);
  out.outputs.add("weights.csv", wcsv.str());
  out.outputs.add("predictions.csv", pred.str());
  out.outputs.add("data.csv", data_csv.str());
  return out;
}

}  // namespace bma
