#include "bma/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bma/errors.hpp"

namespace bma {

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw UsageError("rmse: length mismatch");
  if (pred.size() == 0) throw UsageError("rmse: empty input");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

Eigen::VectorXd r2_hat(double bma_rmse, const Eigen::VectorXd& model_rmses) {
  if (!(bma_rmse >= 0.0)) throw DomainError("r2_hat: negative BMA RMSE");
  Eigen::VectorXd out(model_rmses.size());
  for (Eigen::Index i = 0; i < model_rmses.size(); ++i) {
    if (!(model_rmses[i] > 0.0)) throw DomainError("r2_hat: model RMSE must be positive");
    out[i] = 1.0 - (bma_rmse * bma_rmse) / (model_rmses[i] * model_rmses[i]);
  }
  return out;
}

double empirical_quantile(std::vector<double> v, double q, bool is_sorted) {
  if (v.empty()) throw UsageError("empirical_quantile: no draws");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("empirical_quantile: q outside [0, 1]");
  if (!is_sorted) std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

std::pair<double, double> central_interval(const Eigen::VectorXd& draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("central_interval: level outside (0, 1)");
  std::vector<double> v(draws.data(), draws.data() + draws.size());
  std::sort(v.begin(), v.end());
  const double a = 0.5 * (1.0 - level);
  return {empirical_quantile(v, a, true), empirical_quantile(v, 1.0 - a, true)};
}

double CoverageCurve::mean_abs_deviation() const {
  return (empirical_coverage - nominal_levels).cwiseAbs().mean();
}

Eigen::VectorXd default_levels() {
  Eigen::VectorXd l(20);
  for (int i = 0; i < 19; ++i) l[i] = 0.05 * (i + 1);
  l[19] = 0.99;
  return l;
}

CoverageCurve ecp_curve(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truths, const Eigen::VectorXd& levels) {
  if (truths.size() == 0) throw UsageError("ecp_curve: empty test set");
  if (draws.cols() != truths.size()) throw UsageError("ecp_curve: one draw column per test point required");
  if (levels.size() == 0) throw UsageError("ecp_curve: empty level grid");
  CoverageCurve c;
  c.nominal_levels = levels;
  c.n_test = truths.size();
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(levels.size());
  for (Eigen::Index j = 0; j < truths.size(); ++j) {
    std::vector<double> v(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index i = 0; i < draws.rows(); ++i) v[static_cast<std::size_t>(i)] = draws(i, j);
    std::sort(v.begin(), v.end());
    for (Eigen::Index l = 0; l < levels.size(); ++l) {
      if (!(levels[l] > 0.0 && levels[l] < 1.0)) throw DomainError("ecp_curve: level outside (0, 1)");
      const double a = 0.5 * (1.0 - levels[l]);
      const double lo = empirical_quantile(v, a, true);
      const double hi = empirical_quantile(v, 1.0 - a, true);
      if (truths[j] >= lo && truths[j] <= hi) hits[l] += 1.0;
    }
  }
  c.empirical_coverage = hits / static_cast<double>(truths.size());
  return c;
}

void write_ecp_csv(std::ostream& out, const CoverageCurve& c) {
  out << "level,ecp\n";
  out.precision(17);
  for (Eigen::Index l = 0; l < c.nominal_levels.size(); ++l) {
    out << c.nominal_levels[l] << ',' << c.empirical_coverage[l] << '\n';
  }
}

double effective_sample_size(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = chain.mean();
  const Eigen::VectorXd x = chain.array() - mean;
  const double c0 = x.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto rho = [&](Eigen::Index lag) {
    return x.head(n - lag).dot(x.tail(n - lag)) / (static_cast<double>(n) * c0);
  };
  double sum = 0.0;
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

}  // namespace bma
