#include "bma/evidence.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "bma/errors.hpp"

namespace bma {

std::string to_string(EvidenceMethod m) { return m == EvidenceMethod::PriorMC ? "prior-MC" : "Laplace"; }

EvidenceMethod evidence_method_from_string(const std::string& s) {
  if (s == "prior-MC" || s == "prior_mc" || s == "prior-mc") return EvidenceMethod::PriorMC;
  if (s == "Laplace" || s == "laplace") return EvidenceMethod::Laplace;
  throw UsageError("unknown evidence method '" + s + "'");
}

LogMeanEstimate log_mean_exp_with_se(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 1) throw UsageError("log_mean_exp_with_se: empty input");
  LogMeanEstimate out;
  const double lse = log_sum_exp(v);
  if (lse == kNegInf) {
    out.value = kNegInf;
    out.degenerate = true;
    return out;
  }
  if (v.maxCoeff() == v.minCoeff()) {
    out.value = v[0];
    return out;
  }
  out.value = lse - std::log(static_cast<double>(n));
  if (n > 1) {
    const double nd = static_cast<double>(n);
    const Eigen::ArrayXd nw = nd * (v.array() - lse).exp();
    out.standard_error = std::sqrt((nw - 1.0).square().sum() / (nd * (nd - 1.0)));
  }
  return out;
}

EvidenceEstimate evidence_prior_mc(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                   Eigen::Index n_draws, RngHandle rng, unsigned threads) {
  if (n_draws < 2) throw UsageError("evidence_prior_mc: need at least 2 draws");
  const BoundLikelihood lik(spec, data, subset);

  EvidenceEstimate est;
  est.method = EvidenceMethod::PriorMC;
  est.n_draws = n_draws;
  if (lik.rows().empty()) {
    est.log_evidence = 0.0;
    return est;
  }

  Eigen::VectorXd ll(n_draws);
  const Eigen::Index n_chunks = (n_draws + kEvidenceChunk - 1) / kEvidenceChunk;
  auto run_chunk = [&](Eigen::Index c) {
    Rng r(rng.split(static_cast<std::uint64_t>(c)));
    const Eigen::Index lo = c * kEvidenceChunk;
    const Eigen::Index hi = std::min(n_draws, lo + kEvidenceChunk);
    for (Eigen::Index i = lo; i < hi; ++i) {
      const double v = lik(spec.sample_prior(r));
      ll[i] = std::isnan(v) ? kNegInf : v;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Eigen::Index>(threads, n_chunks));
  if (threads <= 1) {
    for (Eigen::Index c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::future<void>> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.push_back(std::async(std::launch::async, [&, t] {
        for (Eigen::Index c = t; c < n_chunks; c += threads) run_chunk(c);
      }));
    }
    for (auto& w : workers) w.get();
  }

  const LogMeanEstimate m = log_mean_exp_with_se(ll);
  est.log_evidence = m.value;
  est.mc_standard_error = m.standard_error;
  est.degenerate = m.degenerate;
  return est;
}

namespace {

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    y[j] = x[j] + h;
    const double fp = f(y);
    y[j] = x[j] - h;
    const double fm = f(y);
    y[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

bool converged(const Eigen::VectorXd& g, const Eigen::VectorXd& x, double fx, double tol) {
  return ((g.array().abs() * (1.0 + x.array().abs())).maxCoeff()) <= tol * (1.0 + std::abs(fx));
}

}  // namespace

LaplaceResult laplace_approximation(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                    const LaplaceSettings& settings) {
  const BoundLikelihood lik(spec, data, subset);
  const Eigen::Index d = spec.dim();
  LaplaceResult res;
  res.estimate.method = EvidenceMethod::Laplace;

  // Minimize the negative log posterior.
  const std::function<double(const Eigen::VectorXd&)> f = [&](const Eigen::VectorXd& phi) {
    const double lp = log_prior(spec, phi);
    if (lp == kNegInf) return std::numeric_limits<double>::infinity();
    const double v = -(lp + lik(phi));
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  Eigen::VectorXd x = settings.initial.value_or(spec.prior_mean());
  if (x.size() != d) throw UsageError("evidence_laplace: initial point has the wrong dimension");
  double fx = f(x);
  if (!std::isfinite(fx)) throw OptimizationError(spec.name + ": zero posterior density at the starting point");

  if (d == 0) {
    res.mode = x;
    res.hessian.resize(0, 0);
    res.estimate.log_evidence = -fx;
    return res;
  }

  // BFGS with backtracking line search.
  Eigen::VectorXd g = fd_gradient(f, x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  bool done = converged(g, x, fx, settings.gradient_tolerance);
  int it = 0;
  for (; it < settings.max_iterations && !done; ++it) {
    Eigen::VectorXd p = -Hinv * g;
    if (p.dot(g) >= 0.0) {
      Hinv.setIdentity();
      p = -g;
    }
    double t = 1.0;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * p;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * g.dot(p)) break;
    }
    if (!std::isfinite(fn) || fn > fx) break;
    const Eigen::VectorXd gn = fd_gradient(f, xn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd yv = gn - g;
    const double sy = s.dot(yv);
    if (sy > 1e-14 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    const bool stalled = std::abs(fx - fn) <= 1e-15 * (1.0 + std::abs(fx));
    x = xn;
    fx = fn;
    g = gn;
    done = converged(g, x, fx, settings.gradient_tolerance) || stalled;
  }

  // Newton polish on the finite-difference Hessian.
  auto neg_log_post = [&](const Eigen::VectorXd& v) { return f(v); };
  for (int k = 0; k < 10; ++k) {
    const Eigen::MatrixXd Hn = finite_difference_hessian(neg_log_post, x, settings.hessian_step);
    Eigen::LLT<Eigen::MatrixXd> llt(Hn);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd step = -llt.solve(fd_gradient(f, x));
    const Eigen::VectorXd xn = x + step;
    const double fn = f(xn);
    if (!std::isfinite(fn) || fn > fx + 1e-12 * (1.0 + std::abs(fx))) break;
    const bool small = (step.array().abs() / (1.0 + x.array().abs())).maxCoeff() < 1e-12;
    x = xn;
    fx = fn;
    ++it;
    if (small) break;
  }
  g = fd_gradient(f, x);
  if (!converged(g, x, fx, 1e-4)) {
    throw OptimizationError(spec.name + ": Laplace mode search did not converge");
  }

  const Eigen::MatrixXd neg_H = finite_difference_hessian(neg_log_post, x, settings.hessian_step);
  if (!neg_H.allFinite()) throw CurvatureError(spec.name + ": Hessian not finite at the mode");
  Eigen::LLT<Eigen::MatrixXd> llt(neg_H);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw CurvatureError(spec.name + ": Hessian at the mode is not negative definite");
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

  res.mode = x;
  res.hessian = -neg_H;
  res.iterations = it;
  res.estimate.log_evidence = -fx + 0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - 0.5 * log_det;
  return res;
}

}  // namespace bma
