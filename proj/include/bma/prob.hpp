#pragma once

// Random streams and log-domain probability arithmetic.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include "bma/errors.hpp"

namespace bma {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Generator algorithm version. Bump whenever the draw sequence for a fixed
/// (seed, stream) would change: mt19937_64 seeded through std::seed_seq, 53-bit
/// uniforms, Marsaglia polar normals, Marsaglia-Tsang gammas.
inline constexpr int kRngVersion = 1;

/// Value identifying one reproducible random stream.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Child stream; distinct `child` values give distinct stream ids.
  [[nodiscard]] RngHandle split(std::uint64_t child) const;

  friend bool operator==(const RngHandle&, const RngHandle&) = default;
};

/// Stateful generator over one RngHandle. Not shared between threads.
class Rng {
 public:
  explicit Rng(RngHandle handle);

  [[nodiscard]] const RngHandle& handle() const { return handle_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma with shape/rate parametrization.
  double gamma(double shape, double rate);
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

 private:
  RngHandle handle_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view bytes);

double normal_logpdf(double x, double mean, double sd);
double gamma_logpdf(double x, double shape, double rate);

/// ln sum exp(v_i); -inf when every entry is -inf.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw UsageError("log_sum_exp: empty input");
  if (v.derived().array().isNaN().any()) throw DomainError("log_sum_exp: NaN entry");
  const Scalar m = v.maxCoeff();
  if (m == std::numeric_limits<Scalar>::infinity()) throw DomainError("log_sum_exp: +inf entry");
  if (m == -std::numeric_limits<Scalar>::infinity()) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

/// ln of the arithmetic mean of exp(v_i).
template <typename Derived>
typename Derived::Scalar log_mean_exp(const Eigen::DenseBase<Derived>& v) {
  return log_sum_exp(v) - std::log(static_cast<typename Derived::Scalar>(v.size()));
}

/// Probabilities w_i = exp(v_i - log_sum_exp(v)), order preserved.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalize_log_weights(
    const Eigen::DenseBase<Derived>& v) {
  const auto lse = log_sum_exp(v);
  if (lse == -std::numeric_limits<typename Derived::Scalar>::infinity()) {
    throw DegenerateWeightsError("normalize_log_weights: every entry is -inf");
  }
  // std::exp keeps exp(-inf) exactly 0; the vectorized path returns a denormal.
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> w =
      (v.derived().array() - lse).unaryExpr([](typename Derived::Scalar x) { return std::exp(x); });
  return w / w.sum();
}

}  // namespace bma
