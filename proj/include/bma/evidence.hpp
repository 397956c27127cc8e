#pragma once

// Marginal likelihood p(y | M) by prior Monte Carlo and by Laplace approximation.

#include <Eigen/Core>

#include <optional>
#include <string>

#include "bma/model.hpp"

namespace bma {

enum class EvidenceMethod { PriorMC, Laplace };

std::string to_string(EvidenceMethod m);
EvidenceMethod evidence_method_from_string(const std::string& s);

struct EvidenceEstimate {
  double log_evidence = 0.0;
  double mc_standard_error = 0.0;  // log scale, delta method; 0 for Laplace
  EvidenceMethod method = EvidenceMethod::PriorMC;
  Eigen::Index n_draws = 0;
  /// Set when every draw had zero likelihood.
  bool degenerate = false;
};

/// ln mean exp(v) with its delta-method standard error
///   se^2 = sum_i (n w_i - 1)^2 / (n (n - 1)),  w = normalized exp(v).
struct LogMeanEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool degenerate = false;
};
LogMeanEstimate log_mean_exp_with_se(const Eigen::VectorXd& v);

inline constexpr Eigen::Index kDefaultEvidenceDraws = 100000;
inline constexpr Eigen::Index kEvidenceChunk = 4096;

/// Average likelihood over i.i.d. prior draws. Chunk c of kEvidenceChunk
/// draws uses stream rng.split(c), so results do not depend on `threads`.
EvidenceEstimate evidence_prior_mc(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                   Eigen::Index n_draws, RngHandle rng, unsigned threads = 0);

struct LaplaceSettings {
  std::optional<Eigen::VectorXd> initial;  // prior mean when unset
  int max_iterations = 500;
  double gradient_tolerance = 1e-7;
  /// Finite-difference Hessian step: h_j = hessian_step (1 + |mode_j|).
  double hessian_step = 1e-4;
};

struct LaplaceResult {
  EvidenceEstimate estimate;
  Eigen::VectorXd mode;
  Eigen::MatrixXd hessian;  // of the log posterior at the mode
  int iterations = 0;
};

/// ln p(y|mode) + ln pi(mode) + (d/2) ln 2 pi - 1/2 ln det(-H).
LaplaceResult laplace_approximation(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                    const LaplaceSettings& settings = {});

inline EvidenceEstimate evidence_laplace(const ModelSpec& spec, const Dataset& data, const DomainMask& subset,
                                         const LaplaceSettings& settings = {}) {
  return laplace_approximation(spec, data, subset, settings).estimate;
}

/// Central finite-difference Hessian, h_j = step (1 + |x_j|).
template <typename F>
Eigen::MatrixXd finite_difference_hessian(const F& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd h(d);
  for (Eigen::Index j = 0; j < d; ++j) h[j] = step * (1.0 + std::abs(x[j]));
  const double f0 = f(x);
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    y[i] = x[i] + h[i];
    const double fp = f(y);
    y[i] = x[i] - h[i];
    const double fm = f(y);
    y[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      y[i] = x[i] + h[i];
      y[j] = x[j] + h[j];
      const double fpp = f(y);
      y[j] = x[j] - h[j];
      const double fpm = f(y);
      y[i] = x[i] - h[i];
      const double fmm = f(y);
      y[j] = x[j] + h[j];
      const double fmp = f(y);
      y[i] = x[i];
      y[j] = x[j];
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

}  // namespace bma
