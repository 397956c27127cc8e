#include "bma/surrogate.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "bma/prob.hpp"

namespace bma {

void SqExpKernelParams::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("SqExpKernelParams: eta must be positive");
  if (length_scales.size() == 0) throw UsageError("SqExpKernelParams: no length scales");
  for (Eigen::Index i = 0; i < length_scales.size(); ++i) {
    if (!(length_scales[i] > 0.0) || !std::isfinite(length_scales[i])) {
      throw DomainError("SqExpKernelParams: length scales must be positive");
    }
  }
}

GPPosterior GPPosterior::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             const SqExpKernelParams& params, const Eigen::VectorXd& noise_sd,
                             std::optional<double> jitter) {
  params.validate();
  const Eigen::Index n = X.rows();
  if (residuals.size() != n || noise_sd.size() != n) throw UsageError("gp_fit: inconsistent lengths");
  if (X.cols() != params.length_scales.size()) throw UsageError("gp_fit: input dimension mismatch");
  if ((noise_sd.array() < 0.0).any()) throw DomainError("gp_fit: negative noise sd");

  GPPosterior gp;
  gp.X_ = X;
  gp.r_ = residuals;
  gp.params_ = params;
  gp.noise_sd_ = noise_sd;
  if (n == 0) return gp;

  const double eta2 = params.eta * params.eta;
  const double max_jitter = 1e-4 * eta2;
  double j = jitter.value_or(1e-10 * eta2);
  if (!(j > 0.0)) throw DomainError("gp_fit: jitter must be positive");

  Eigen::MatrixXd K = kernel_matrix(X, X, params);
  K.diagonal().array() += noise_sd.array().square();

  std::vector<double> tried;
  for (;;) {
    tried.push_back(j);
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      gp.L_ = llt.matrixL();
      gp.alpha_ = llt.solve(residuals);
      gp.jitter_ = j;
      const double log_det = 2.0 * gp.L_.diagonal().array().log().sum();
      gp.log_marginal_likelihood_ =
          -0.5 * residuals.dot(gp.alpha_) - 0.5 * log_det - static_cast<double>(n) * kHalfLog2Pi;
      return gp;
    }
    if (j * 10.0 > max_jitter * (1.0 + 1e-12)) break;
    j *= 10.0;
  }
  std::ostringstream msg;
  msg << "gp_fit: Cholesky failed for jitter ladder";
  for (double t : tried) msg << ' ' << t;
  throw NumericalError(msg.str(), tried);
}

GPPrediction GPPosterior::predict(const Eigen::MatrixXd& Xstar) const {
  if (Xstar.cols() != params_.length_scales.size()) throw UsageError("gp_predict: input dimension mismatch");
  const double eta2 = params_.eta * params_.eta;
  GPPrediction out;
  if (X_.rows() == 0) {
    out.mean = Eigen::VectorXd::Zero(Xstar.rows());
    out.variance = Eigen::VectorXd::Constant(Xstar.rows(), eta2);
    return out;
  }
  const Eigen::MatrixXd Ks = kernel_matrix(Xstar, X_, params_);
  out.mean = Ks * alpha_;
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Ks.transpose());
  out.variance = (eta2 - V.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
  return out;
}

Eigen::VectorXd LinearizedModel::evaluate(const Eigen::VectorXd& theta) const {
  if (theta.size() != theta0.size()) throw UsageError("LinearizedModel: parameter dimension mismatch");
  return f0 + gradient * (theta - theta0);
}

ResponseFn LinearizedModel::as_response() const {
  auto table = std::make_shared<std::map<std::vector<double>, Eigen::Index>>();
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    std::vector<double> key(design.cols());
    for (Eigen::Index c = 0; c < design.cols(); ++c) key[c] = design(i, c);
    (*table)[key] = i;
  }
  auto self = std::make_shared<LinearizedModel>(*this);
  return [table, self](const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd all = self->evaluate(theta);
    Eigen::VectorXd out(X.rows());
    std::vector<double> key(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index c = 0; c < X.cols(); ++c) key[c] = X(i, c);
      auto it = table->find(key);
      if (it == table->end()) throw UsageError("LinearizedModel: row not among tabulated design points");
      out[i] = all[it->second];
    }
    return out;
  };
}

Eigen::MatrixXd finite_difference_jacobian(const ResponseFn& f, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& theta0, double step) {
  if (!(step > 0.0)) throw DomainError("finite_difference_jacobian: step must be positive");
  Eigen::MatrixXd J(X.rows(), theta0.size());
  Eigen::VectorXd tp = theta0, tm = theta0;
  for (Eigen::Index j = 0; j < theta0.size(); ++j) {
    const double h = step * (1.0 + std::abs(theta0[j]));
    tp[j] = theta0[j] + h;
    tm[j] = theta0[j] - h;
    const Eigen::VectorXd fp = f(X, tp);
    const Eigen::VectorXd fm = f(X, tm);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw ModelEvaluationError("linearize: non-finite response at perturbed parameters");
    }
    J.col(j) = (fp - fm) / (tp[j] - tm[j]);
    tp[j] = tm[j] = theta0[j];
  }
  return J;
}

LinearizedModel linearize(const ResponseFn& f, const Eigen::VectorXd& theta0, const Eigen::MatrixXd& X, double step,
                          const GradientFn& analytic_gradient) {
  LinearizedModel lin;
  lin.theta0 = theta0;
  lin.design = X;
  lin.f0 = f(X, theta0);
  if (!lin.f0.allFinite()) throw ModelEvaluationError("linearize: non-finite response at theta0");
  lin.gradient = analytic_gradient ? analytic_gradient(X, theta0) : finite_difference_jacobian(f, X, theta0, step);
  if (lin.gradient.rows() != X.rows() || lin.gradient.cols() != theta0.size()) {
    throw UsageError("linearize: gradient has the wrong shape");
  }
  if (!lin.gradient.allFinite()) throw ModelEvaluationError("linearize: non-finite gradient");
  return lin;
}

ResponseFn linearized_response(ResponseFn f, Eigen::VectorXd theta0, double step, GradientFn analytic_gradient) {
  return [f = std::move(f), theta0 = std::move(theta0), step, g = std::move(analytic_gradient)](
             const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
    return linearize(f, theta0, X, step, g).evaluate(theta);
  };
}

namespace {

Eigen::MatrixXd joint_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
  Eigen::MatrixXd Z(X.rows(), X.cols() + theta.size());
  Z.leftCols(X.cols()) = X;
  Z.rightCols(theta.size()) = theta.transpose().replicate(X.rows(), 1);
  return Z;
}

}  // namespace

GpEmulator::GpEmulator(const Eigen::MatrixXd& run_x, const Eigen::MatrixXd& run_theta,
                       const Eigen::VectorXd& run_outputs, ResponseFn mean, SqExpKernelParams kernel,
                       double run_noise_sd)
    : mean_(std::move(mean)) {
  const Eigen::Index n = run_x.rows();
  if (run_theta.rows() != n || run_outputs.size() != n) throw UsageError("GpEmulator: inconsistent run table");
  Eigen::MatrixXd Z(n, run_x.cols() + run_theta.cols());
  Z << run_x, run_theta;
  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd m = mean_(run_x.row(i), run_theta.row(i).transpose());
    resid[i] = run_outputs[i] - m[0];
  }
  gp_ = std::make_shared<const GPPosterior>(
      GPPosterior::fit(Z, resid, kernel, Eigen::VectorXd::Constant(n, run_noise_sd)));
}

GPPrediction GpEmulator::predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) const {
  GPPrediction p = gp_->predict(joint_inputs(X, theta));
  p.mean += mean_(X, theta);
  return p;
}

Eigen::VectorXd GpEmulator::operator()(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) const {
  return predict(X, theta).mean;
}

ResponseFn GpEmulator::as_response() const {
  return [self = *this](const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) { return self(X, theta); };
}

}  // namespace bma
