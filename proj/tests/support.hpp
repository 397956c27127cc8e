#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bma/model.hpp"

namespace bma::test {

inline std::vector<std::string> labels(Eigen::Index n, const std::string& o = "y") {
  return std::vector<std::string>(static_cast<std::size_t>(n), o);
}

inline std::vector<PointId> ids(Eigen::Index n, const std::string& prefix = "p") {
  std::vector<PointId> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline Dataset make_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::string& prefix = "p") {
  return Dataset(X, y, labels(y.size()), ids(y.size(), prefix));
}

// Dense-inverse multivariate normal log density, no Cholesky.
inline double dense_mvn_logpdf(const Eigen::VectorXd& r, const Eigen::MatrixXd& S) {
  const Eigen::Index n = r.size();
  const Eigen::MatrixXd inv = S.inverse();
  const double logdet = std::log(S.determinant());
  return -0.5 * r.dot(inv * r) - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// Kernel entries written out one at a time.
inline Eigen::MatrixXd naive_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double eta,
                                    const Eigen::VectorXd& rho) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < A.cols(); ++d) {
        const double z = (A(i, d) - B(j, d)) / rho[d];
        s += z * z;
      }
      K(i, j) = eta * eta * std::exp(-0.5 * s);
    }
  }
  return K;
}

// y = G theta + N(0, s^2 I), theta ~ N(m0, diag(sd0^2)): y ~ N(G m0, G S0 G' + s^2 I).
inline double conjugate_log_marginal(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, const Eigen::VectorXd& m0,
                                     const Eigen::VectorXd& sd0, double s) {
  const Eigen::MatrixXd S0 = sd0.array().square().matrix().asDiagonal();
  const Eigen::MatrixXd S =
      G * S0 * G.transpose() + s * s * Eigen::MatrixXd::Identity(y.size(), y.size());
  return dense_mvn_logpdf(y - G * m0, S);
}

// Polynomial response theta_0 + theta_1 x + ... on the first input column.
inline Response polynomial_response(std::size_t degree, std::size_t first_param = 0) {
  Response r;
  r.fn = [degree](const Eigen::MatrixXd& X, const Eigen::VectorXd& th) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double p = 1.0;
      for (std::size_t j = 0; j <= degree; ++j) {
        out[i] += th[static_cast<Eigen::Index>(j)] * p;
        p *= X(i, 0);
      }
    }
    return out;
  };
  for (std::size_t j = 0; j <= degree; ++j) r.theta_index.push_back(first_param + j);
  return r;
}

inline Eigen::MatrixXd polynomial_design(const Eigen::MatrixXd& X, std::size_t degree) {
  Eigen::MatrixXd G(X.rows(), static_cast<Eigen::Index>(degree + 1));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      G(i, j) = p;
      p *= X(i, 0);
    }
  }
  return G;
}

// Linear model with normal priors and known noise sd.
inline ModelSpec linear_model(std::size_t degree, const Eigen::VectorXd& m0, const Eigen::VectorXd& sd0, double sigma,
                              const std::string& name = "lin") {
  ModelSpec s;
  s.name = name;
  s.response = polynomial_response(degree);
  for (std::size_t j = 0; j <= degree; ++j) {
    s.parameters.push_back({"b" + std::to_string(j), Prior::normal(m0[static_cast<Eigen::Index>(j)],
                                                                   sd0[static_cast<Eigen::Index>(j)])});
  }
  s.noise.fallback = Quantity::constant(sigma);
  return s;
}

// Model with no parameters whose prediction at row i is `values[i]` (by x = i).
inline ModelSpec fixed_model(const std::string& name, std::vector<double> values, double sigma = 1.0) {
  ModelSpec s;
  s.name = name;
  s.response.fn = [values](const Eigen::MatrixXd& X, const Eigen::VectorXd&) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = values.at(static_cast<std::size_t>(std::llround(X(i, 0))));
    return out;
  };
  s.noise.fallback = Quantity::constant(sigma);
  return s;
}

// Standard normal CDF.
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Kolmogorov-Smirnov distance between a sample and a CDF.
template <typename Cdf>
double ks_distance(std::vector<double> v, Cdf cdf) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = cdf(v[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

}  // namespace bma::test
