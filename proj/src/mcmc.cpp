#include "bma/mcmc.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bma/errors.hpp"

namespace bma {

namespace {

// Sampling-space coordinates: log for positive-support priors.
struct Transform {
  std::vector<bool> log_scale;

  explicit Transform(const ModelSpec& spec) {
    for (const auto& p : spec.parameters) log_scale.push_back(p.prior.positive());
  }
  Eigen::VectorXd to_phi(const Eigen::VectorXd& z) const {
    Eigen::VectorXd phi = z;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      if (log_scale[static_cast<std::size_t>(j)]) phi[j] = std::exp(z[j]);
    }
    return phi;
  }
  Eigen::VectorXd to_z(const Eigen::VectorXd& phi) const {
    Eigen::VectorXd z = phi;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      if (log_scale[static_cast<std::size_t>(j)]) z[j] = std::log(phi[j]);
    }
    return z;
  }
  double log_jacobian(const Eigen::VectorXd& z) const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      if (log_scale[static_cast<std::size_t>(j)]) s += z[j];
    }
    return s;
  }
};

struct State {
  Eigen::VectorXd z, phi;
  double log_post = kNegInf;  // phi space
  double log_lik = kNegInf;
  double target = kNegInf;  // z space
};

}  // namespace

PosteriorSamples sample_posterior(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                  const ChainSettings& settings, RngHandle handle) {
  if (settings.n_samples < 1 || settings.burn_in < 0 || settings.thin < 1) {
    throw UsageError("sample_posterior: invalid chain settings");
  }
  const Eigen::Index d = spec.dim();
  const BoundLikelihood lik(spec, data, subset);
  const Transform tr(spec);
  Rng rng(handle);

  auto evaluate = [&](const Eigen::VectorXd& z) {
    State s;
    s.z = z;
    s.phi = tr.to_phi(z);
    const double lp = log_prior(spec, s.phi);
    if (lp == kNegInf) return s;
    s.log_lik = lik(s.phi);
    s.log_post = lp + s.log_lik;
    if (std::isnan(s.log_post)) s.log_post = kNegInf;
    s.target = s.log_post == kNegInf ? kNegInf : s.log_post + tr.log_jacobian(z);
    return s;
  };

  Eigen::VectorXd phi0 = settings.initial.value_or(spec.prior_mean());
  if (phi0.size() != d) throw UsageError("sample_posterior: initial point has the wrong dimension");
  for (Eigen::Index j = 0; j < d; ++j) {
    if (tr.log_scale[static_cast<std::size_t>(j)] && !(phi0[j] > 0.0)) {
      throw InitializationError(spec.name + ": initial point outside the prior support");
    }
  }
  State cur = evaluate(tr.to_z(phi0));
  if (!std::isfinite(cur.log_post)) throw InitializationError(spec.name + ": initial point has zero posterior density");

  PosteriorSamples out;
  out.seed = handle;
  out.burn_in = settings.burn_in;
  out.thin = settings.thin;
  out.draws.resize(settings.n_samples, d);
  out.log_post.resize(settings.n_samples);
  out.log_lik.resize(settings.n_samples);

  if (d == 0) {
    out.draws.setZero();
    out.log_post.setConstant(cur.log_post);
    out.log_lik.setConstant(cur.log_lik);
    out.acceptance_rate = 1.0;
    out.proposal_cov.resize(0, 0);
    return out;
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * (settings.initial_scale * settings.initial_scale);
  Eigen::MatrixXd chol = cov.llt().matrixL();
  double log_scale = 0.0;

  // Running moments of burn-in states from burn_in/4 on.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index n_acc = 0;
  Eigen::Index n_finite = 0;
  const Eigen::Index collect_from = settings.burn_in / 4;

  auto step = [&](double scale) {
    Eigen::VectorXd eps(d);
    for (Eigen::Index j = 0; j < d; ++j) eps[j] = rng.normal();
    State prop = evaluate(cur.z + scale * (chol * eps));
    double log_alpha = kNegInf;
    if (prop.target > kNegInf) {
      ++n_finite;
      log_alpha = std::min(0.0, prop.target - cur.target);
    }
    const double u = rng.uniform();
    const bool accept = log_alpha > kNegInf && std::log(u) < log_alpha;
    if (accept) cur = std::move(prop);
    return std::pair{accept, std::exp(log_alpha)};
  };

  for (Eigen::Index t = 0; t < settings.burn_in; ++t) {
    const auto [accepted, alpha] = step(std::exp(log_scale));
    (void)accepted;
    log_scale += std::pow(1.0 / static_cast<double>(t + 1), 0.6) * (alpha - settings.target_acceptance);
    log_scale = std::clamp(log_scale, -30.0, 30.0);

    if (t >= collect_from) {
      const double k = static_cast<double>(t - collect_from + 1);
      const Eigen::VectorXd delta = cur.z - mean;
      mean += delta / k;
      m2 += delta * (cur.z - mean).transpose();
      const bool refresh = t == settings.burn_in / 2 || t == (3 * settings.burn_in) / 4;
      if (refresh && k > static_cast<double>(2 * d + 2)) {
        Eigen::MatrixXd emp = m2 / (k - 1.0);
        emp.diagonal().array() += 1e-10 * (1.0 + emp.diagonal().array().abs());
        Eigen::LLT<Eigen::MatrixXd> llt(emp);
        if (llt.info() == Eigen::Success && emp.diagonal().minCoeff() > 0.0) {
          cov = emp;
          chol = llt.matrixL();
          log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
        }
      }
    }
  }
  if (settings.burn_in > 0 && n_finite == 0) {
    throw DivergenceError(spec.name + ": no proposal with finite posterior during burn-in");
  }

  const double scale = std::exp(log_scale);
  out.proposal_cov = scale * scale * cov;
  for (Eigen::Index i = 0; i < settings.n_samples; ++i) {
    for (Eigen::Index k = 0; k < settings.thin; ++k) {
      if (step(scale).first) ++n_acc;
    }
    out.draws.row(i) = cur.phi.transpose();
    out.log_post[i] = cur.log_post;
    out.log_lik[i] = cur.log_lik;
  }
  out.acceptance_rate = static_cast<double>(n_acc) / static_cast<double>(settings.n_samples * settings.thin);
  return out;
}

Eigen::MatrixXd posterior_predictive(const ModelSpec& spec, const PosteriorSamples& samples, const Dataset& data,
                                     const Eigen::MatrixXd& xstar, const std::vector<std::string>& observable,
                                     RngHandle handle) {
  if (samples.size() == 0) throw UsageError("posterior_predictive: no posterior draws");
  Rng rng(handle);
  Eigen::MatrixXd out(samples.size(), xstar.rows());
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    out.row(i) = predictive_draws(spec, samples.draws.row(i).transpose(), data, xstar, observable, rng).transpose();
  }
  return out;
}

PredictiveMoments posterior_predictive_moments(const ModelSpec& spec, const PosteriorSamples& samples,
                                               const Dataset& data, const Eigen::MatrixXd& xstar,
                                               const std::vector<std::string>& observable) {
  if (samples.size() == 0) throw UsageError("posterior_predictive_moments: no posterior draws");
  const Eigen::Index m = xstar.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sum_sq = Eigen::VectorXd::Zero(m), var = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const PredictiveMoments pm = predictive_moments(spec, samples.draws.row(i).transpose(), data, xstar, observable);
    sum += pm.mean;
    sum_sq += pm.mean.cwiseAbs2();
    var += pm.variance;
  }
  const double n = static_cast<double>(samples.size());
  PredictiveMoments out;
  out.mean = sum / n;
  out.variance = (var / n + (sum_sq / n - out.mean.cwiseAbs2())).cwiseMax(0.0);
  return out;
}

void write_trace_csv(std::ostream& out, const PosteriorSamples& samples, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != samples.draws.cols()) {
    throw UsageError("write_trace_csv: one name per parameter required");
  }
  out << "draw_index";
  for (const auto& n : names) out << ',' << n;
  out << ",log_post\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < samples.draws.cols(); ++j) out << ',' << samples.draws(i, j);
    out << ',' << samples.log_post[i] << '\n';
  }
}

}  // namespace bma
