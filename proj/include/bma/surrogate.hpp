#pragma once

// Gaussian-process machinery and linearized response surrogates.

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "bma/errors.hpp"

namespace bma {

/// Squared-exponential kernel: eta^2 exp(-sum_d (x_d - x'_d)^2 / (2 rho_d^2)).
struct SqExpKernelParams {
  double eta = 1.0;
  Eigen::VectorXd length_scales;

  void validate() const;
};

template <typename D1, typename D2>
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixBase<D1>& X, const Eigen::MatrixBase<D2>& X2,
                              const SqExpKernelParams& params) {
  params.validate();
  const Eigen::Index d = params.length_scales.size();
  if (X.cols() != d || X2.cols() != d) {
    throw UsageError("kernel_matrix: input dimension does not match length_scales");
  }
  const Eigen::RowVectorXd inv_rho = params.length_scales.cwiseInverse().transpose();
  const Eigen::MatrixXd A = X.derived().array().rowwise() * inv_rho.array();
  const Eigen::MatrixXd B = X2.derived().array().rowwise() * inv_rho.array();
  Eigen::MatrixXd K(X.rows(), X2.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    K.col(j) = (A.rowwise() - B.row(j)).rowwise().squaredNorm();
  }
  return (params.eta * params.eta) * (-0.5 * K.array()).exp().matrix();
}

struct GPPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // latent (noise-free) marginal variance, floored at 0
};

/// Zero-mean GP conditioned on residuals. Immutable once fitted.
class GPPosterior {
 public:
  /// Factorizes K + diag(noise_sd^2) + jitter I. Jitter escalates x10 from
  /// `jitter` up to 1e-4 eta^2; failure past that throws NumericalError.
  static GPPosterior fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                         const SqExpKernelParams& params, const Eigen::VectorXd& noise_sd,
                         std::optional<double> jitter = std::nullopt);

  [[nodiscard]] GPPrediction predict(const Eigen::MatrixXd& Xstar) const;

  /// ln N(residuals; 0, K + diag(noise^2) + jitter I).
  [[nodiscard]] double log_marginal_likelihood() const { return log_marginal_likelihood_; }

  [[nodiscard]] const Eigen::MatrixXd& inputs() const { return X_; }
  [[nodiscard]] const Eigen::VectorXd& residuals() const { return r_; }
  [[nodiscard]] const SqExpKernelParams& kernel() const { return params_; }
  [[nodiscard]] const Eigen::VectorXd& noise_sd() const { return noise_sd_; }
  [[nodiscard]] Eigen::MatrixXd cholesky_factor() const { return L_; }
  [[nodiscard]] double jitter() const { return jitter_; }

 private:
  GPPosterior() = default;

  Eigen::MatrixXd X_;
  Eigen::VectorXd r_;
  SqExpKernelParams params_;
  Eigen::VectorXd noise_sd_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double log_marginal_likelihood_ = 0.0;
};

/// Vectorized computer-model response: one output per row of X.
using ResponseFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta)>;
/// Jacobian of a response wrt theta: rows of X by dim(theta).
using GradientFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta)>;

/// First-order expansion f(x, theta0) + grad f(x, theta0) (theta - theta0)
/// tabulated over a fixed set of design rows.
struct LinearizedModel {
  Eigen::VectorXd theta0;
  Eigen::MatrixXd design;    // rows the expansion is tabulated at
  Eigen::VectorXd f0;        // f(design_i, theta0)
  Eigen::MatrixXd gradient;  // rows: design points, cols: parameters

  [[nodiscard]] Eigen::VectorXd evaluate(const Eigen::VectorXd& theta) const;
  /// Response over rows that must appear verbatim in `design`.
  [[nodiscard]] ResponseFn as_response() const;
};

/// Default relative finite-difference step: h_j = step (1 + |theta0_j|).
inline constexpr double kDefaultFdStep = 1e-5;

/// Central-difference Jacobian of f at theta0 over rows X.
Eigen::MatrixXd finite_difference_jacobian(const ResponseFn& f, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& theta0, double step = kDefaultFdStep);

LinearizedModel linearize(const ResponseFn& f, const Eigen::VectorXd& theta0, const Eigen::MatrixXd& X,
                          double step = kDefaultFdStep, const GradientFn& analytic_gradient = {});

/// Response that linearizes f around theta0 at whatever rows it is asked for.
ResponseFn linearized_response(ResponseFn f, Eigen::VectorXd theta0, double step = kDefaultFdStep,
                               GradientFn analytic_gradient = {});

/// GP emulator over joint (x, theta) inputs whose mean function is `mean`
/// (typically a linearized response). Trained on pre-computed model runs.
class GpEmulator {
 public:
  GpEmulator(const Eigen::MatrixXd& run_x, const Eigen::MatrixXd& run_theta, const Eigen::VectorXd& run_outputs,
             ResponseFn mean, SqExpKernelParams kernel, double run_noise_sd = 1e-6);

  [[nodiscard]] Eigen::VectorXd operator()(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) const;
  [[nodiscard]] GPPrediction predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) const;
  [[nodiscard]] ResponseFn as_response() const;

 private:
  ResponseFn mean_;
  std::shared_ptr<const GPPosterior> gp_;
};

}  // namespace bma
