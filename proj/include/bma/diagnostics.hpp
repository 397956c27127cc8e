#pragma once

// Held-out evaluation: RMSE, sample r^2, central intervals, coverage curves.

#include <Eigen/Core>

#include <iosfwd>
#include <utility>
#include <vector>

namespace bma {

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Per model: 1 - bma_rmse^2 / rmse_i^2 (sample version of the PMSE reduction).
Eigen::VectorXd r2_hat(double bma_rmse, const Eigen::VectorXd& model_rmses);

/// Empirical quantile by linear interpolation between order statistics
/// (position q (n - 1) in the sorted sample).
double empirical_quantile(std::vector<double> sorted_or_not, double q, bool is_sorted = false);

/// Equal-tailed interval at quantiles (1 - level)/2 and (1 + level)/2.
std::pair<double, double> central_interval(const Eigen::VectorXd& draws, double level);

struct CoverageCurve {
  Eigen::VectorXd nominal_levels;
  Eigen::VectorXd empirical_coverage;
  Eigen::Index n_test = 0;

  /// Mean |ECP - nominal| over the grid.
  [[nodiscard]] double mean_abs_deviation() const;
};

/// 0.05, 0.10, ..., 0.95, 0.99.
Eigen::VectorXd default_levels();

/// `draws` column j holds predictive draws for test point j.
CoverageCurve ecp_curve(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truths,
                        const Eigen::VectorXd& levels = default_levels());

/// CSV `level,ecp`.
void write_ecp_csv(std::ostream& out, const CoverageCurve& c);

/// Effective sample size of a scalar chain (Geyer initial positive sequence).
double effective_sample_size(const Eigen::VectorXd& chain);

}  // namespace bma
