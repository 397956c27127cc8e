#include "bma/ensemble.hpp"

#include <cmath>

#include "bma/errors.hpp"

namespace bma {

WeightedEnsemble posterior_model_weights(const Eigen::VectorXd& prior, const Eigen::VectorXd& log_ev,
                                         const Eigen::VectorXd& corrections, std::vector<std::string> names) {
  const Eigen::Index k = prior.size();
  if (k == 0 || log_ev.size() != k || corrections.size() != k) {
    throw UsageError("posterior_model_weights: length mismatch");
  }
  if ((prior.array() < 0.0).any() || std::abs(prior.sum() - 1.0) > 1e-9) {
    throw UsageError("posterior_model_weights: prior weights must be a probability vector");
  }
  if (names.empty()) {
    for (Eigen::Index i = 0; i < k; ++i) names.push_back("M" + std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(names.size()) != k) throw UsageError("posterior_model_weights: one name per model");

  Eigen::VectorXd logw(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double lp = prior[i] > 0.0 ? std::log(prior[i]) : kNegInf;
    logw[i] = (lp == kNegInf || log_ev[i] == kNegInf || corrections[i] == kNegInf) ? kNegInf
                                                                                  : lp + log_ev[i] + corrections[i];
  }
  WeightedEnsemble e;
  e.names = std::move(names);
  e.prior_weights = prior;
  e.log_evidences = log_ev;
  e.corrective_log_factors = corrections;
  e.posterior_weights = normalize_log_weights(logw);
  return e;
}

Eigen::MatrixXd bma_mixture_draws(const Eigen::VectorXd& weights, const std::vector<Eigen::MatrixXd>& per_model,
                                  Eigen::Index n_out, Rng& rng, std::vector<Eigen::Index>* labels) {
  if (static_cast<Eigen::Index>(per_model.size()) != weights.size() || weights.size() == 0) {
    throw UsageError("bma_mixture_draws: one draw matrix per model required");
  }
  Eigen::Index cols = -1;
  for (std::size_t k = 0; k < per_model.size(); ++k) {
    if (weights[static_cast<Eigen::Index>(k)] <= 0.0) continue;
    if (per_model[k].rows() == 0) throw UsageError("bma_mixture_draws: positive-weight model without draws");
    if (cols >= 0 && per_model[k].cols() != cols) throw UsageError("bma_mixture_draws: column mismatch");
    cols = per_model[k].cols();
  }
  if (cols < 0) throw DegenerateWeightsError("bma_mixture_draws: no model with positive weight");

  Eigen::VectorXd cdf(weights.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) cdf[k] = (acc += std::max(weights[k], 0.0));

  Eigen::MatrixXd out(n_out, cols);
  if (labels) labels->assign(static_cast<std::size_t>(n_out), 0);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const double u = rng.uniform() * acc;
    Eigen::Index k = 0;
    while (k + 1 < weights.size() && (u >= cdf[k] || weights[k] <= 0.0)) ++k;
    const auto& m = per_model[static_cast<std::size_t>(k)];
    out.row(i) = m.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m.rows()))));
    if (labels) (*labels)[static_cast<std::size_t>(i)] = k;
  }
  return out;
}

Eigen::VectorXd bma_mixture_draws(const Eigen::VectorXd& weights, const std::vector<Eigen::VectorXd>& per_model,
                                  Eigen::Index n_out, Rng& rng, std::vector<Eigen::Index>* labels) {
  std::vector<Eigen::MatrixXd> cols(per_model.begin(), per_model.end());
  return bma_mixture_draws(weights, cols, n_out, rng, labels).col(0);
}

namespace {

McValue mc_mean(const Eigen::ArrayXd& d) {
  const double n = static_cast<double>(d.size());
  const double m = d.mean();
  const double var = d.size() > 1 ? (d - m).square().sum() / (n - 1.0) : 0.0;
  return {m, std::sqrt(var / n)};
}

}  // namespace

PmseReport pmse_report(const Eigen::VectorXd& weights, const Eigen::VectorXd& mixture,
                       const std::vector<Eigen::Index>& labels, const Eigen::VectorXd& fallback_means,
                       const Eigen::MatrixXd& lambda_grid, double argmin_step) {
  const Eigen::Index K = weights.size();
  const Eigen::Index n = mixture.size();
  if (K < 2) throw UsageError("pmse_report: at least two models required");
  if (n < 2 || static_cast<Eigen::Index>(labels.size()) != n) throw UsageError("pmse_report: labelled mixture draws required");
  if (fallback_means.size() != K) throw UsageError("pmse_report: one fallback mean per model required");
  if (lambda_grid.rows() > 0 && lambda_grid.cols() != K) throw UsageError("pmse_report: lambda rows must have one entry per model");

  PmseReport r;
  r.weights = weights;
  r.model_means = fallback_means;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = labels[static_cast<std::size_t>(i)];
    sums[k] += mixture[i];
    counts[k] += 1.0;
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (counts[k] > 0.0) r.model_means[k] = sums[k] / counts[k];
  }
  const Eigen::ArrayXd y = mixture.array();
  const double yhat = weights.dot(r.model_means);
  r.bma_mean = yhat;

  r.model_pmse.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) r.model_pmse[k] = (y - r.model_means[k]).square().mean();
  const Eigen::ArrayXd bma_sq = (y - yhat).square();
  r.bma_pmse = mc_mean(bma_sq);

  Eigen::MatrixXd grid = lambda_grid;
  grid.conservativeResize(grid.rows() + 1, K);
  grid.row(grid.rows() - 1) = weights.transpose();
  for (Eigen::Index g = 0; g < grid.rows(); ++g) {
    LambdaEntry e;
    e.lambda = grid.row(g).transpose();
    if ((e.lambda.array() < -1e-12).any() || std::abs(e.lambda.sum() - 1.0) > 1e-9) {
      throw UsageError("pmse_report: lambda must lie on the simplex");
    }
    const double ylam = e.lambda.dot(r.model_means);
    const Eigen::ArrayXd sq = (y - ylam).square();
    e.pmse = sq.mean();
    if (K == 2) {
      const double gap_root = (e.lambda[0] - weights[0]) * r.model_means[0] + (e.lambda[1] - weights[1]) * r.model_means[1];
      e.gap = gap_root * gap_root;
      e.identity_residual = mc_mean(sq - bma_sq - *e.gap);
    }
    r.lambdas.push_back(std::move(e));
  }

  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < K; ++k) {
    if (r.model_pmse[k] < r.model_pmse[best]) best = k;
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (k != best && std::abs(r.model_pmse[k] - r.model_pmse[best]) <= 1e-12 * std::abs(r.model_pmse[best])) {
      r.best_model_tie = true;
    }
  }
  r.best_model = best;
  r.r2_bma = 1.0 - r.bma_pmse.value / r.model_pmse[best];

  if (K == 2) {
    const double p1 = weights[0], p2 = weights[1];
    const double y1 = r.model_means[0], y2 = r.model_means[1];
    const double c2 = (y1 - y2) * (y1 - y2);
    const Eigen::ArrayXd e1 = (y - y1).square();
    const Eigen::ArrayXd e2 = (y - y2).square();
    const Eigen::ArrayXd coupling = (y1 - y) * (y - y2);
    r.dual_first = mc_mean(e1 - p2 * p2 * c2 - bma_sq);
    r.dual_second = mc_mean(e2 - p1 * p1 * c2 - bma_sq);
    r.decomposition_first = (p1 - p1 * p1) * r.model_pmse[0];
    r.decomposition_second = (p2 - p2 * p2) * r.model_pmse[1];
    r.decomposition_coupling = (p1 * p1 + p2 * p2) * coupling.mean();
    r.decomposition_residual =
        mc_mean(bma_sq - ((p1 - p1 * p1) * e1 + (p2 - p2 * p2) * e2 - (p1 * p1 + p2 * p2) * coupling));

    const Eigen::Index steps = static_cast<Eigen::Index>(std::llround(1.0 / argmin_step));
    double best_val = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s <= steps; ++s) {
      const double l1 = static_cast<double>(s) / static_cast<double>(steps);
      const double v = (y - l1 * y1 - (1.0 - l1) * y2).square().mean();
      if (v < best_val) {
        best_val = v;
        r.grid_argmin = l1;
      }
    }
    const double p_other = best == 0 ? p2 : p1;
    r.r2_two_model = p_other * p_other * c2 / r.model_pmse[best];
  }
  return r;
}

PmseReport pmse_report(const WeightedEnsemble& ensemble, const std::vector<Eigen::VectorXd>& per_model,
                       const Eigen::MatrixXd& lambda_grid, Eigen::Index n_mixture, RngHandle handle) {
  Rng rng(handle);
  std::vector<Eigen::Index> labels;
  const Eigen::VectorXd mix = bma_mixture_draws(ensemble.posterior_weights, per_model, n_mixture, rng, &labels);
  Eigen::VectorXd means(static_cast<Eigen::Index>(per_model.size()));
  for (std::size_t k = 0; k < per_model.size(); ++k) {
    means[static_cast<Eigen::Index>(k)] = per_model[k].size() > 0 ? per_model[k].mean() : 0.0;
  }
  return pmse_report(ensemble.posterior_weights, mix, labels, means, lambda_grid);
}

namespace {

nlohmann::json vec(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      a.push_back(v[i]);
    } else {
      a.push_back(v[i] < 0 ? "-inf" : (v[i] > 0 ? "inf" : "nan"));
    }
  }
  return a;
}

nlohmann::json mc(const McValue& m) { return {{"value", m.value}, {"standard_error", m.standard_error}}; }

}  // namespace

nlohmann::json to_json(const WeightedEnsemble& e) {
  return {{"models", e.names},
          {"prior_weights", vec(e.prior_weights)},
          {"log_evidences", vec(e.log_evidences)},
          {"corrections", vec(e.corrective_log_factors)},
          {"weights", vec(e.posterior_weights)}};
}

nlohmann::json to_json(const PmseReport& r) {
  nlohmann::json j;
  j["weights"] = vec(r.weights);
  j["model_means"] = vec(r.model_means);
  j["bma_mean"] = r.bma_mean;
  j["model_pmse"] = vec(r.model_pmse);
  j["bma_pmse"] = mc(r.bma_pmse);
  j["r2_bma"] = {{"value", r.r2_bma}, {"version", "posterior"}, {"best_model", r.best_model}, {"tie", r.best_model_tie}};
  auto lam = nlohmann::json::array();
  for (const auto& e : r.lambdas) {
    nlohmann::json le{{"lambda", vec(e.lambda)}, {"pmse", e.pmse}};
    if (e.gap) le["gap"] = *e.gap;
    if (e.identity_residual) le["identity_residual"] = mc(*e.identity_residual);
    lam.push_back(le);
  }
  j["lambdas"] = lam;
  if (r.dual_first) j["dual"] = {{"first", mc(*r.dual_first)}, {"second", mc(*r.dual_second)}};
  if (r.decomposition_first) {
    j["decomposition"] = {{"first", *r.decomposition_first},
                          {"second", *r.decomposition_second},
                          {"coupling", *r.decomposition_coupling},
                          {"residual", mc(*r.decomposition_residual)}};
  }
  if (r.grid_argmin) j["grid_argmin"] = *r.grid_argmin;
  if (r.r2_two_model) j["r2_two_model"] = *r.r2_two_model;
  return j;
}

}  // namespace bma
