#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bma/diagnostics.hpp"
#include "bma/errors.hpp"
#include "bma/prob.hpp"

using namespace bma;

TEST_CASE("rmse") {
  CHECK(rmse(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)) == 0.0);
  CHECK(rmse(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK_THROWS_AS(rmse(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), UsageError);
  CHECK_THROWS_AS(rmse(Eigen::VectorXd(0), Eigen::VectorXd(0)), UsageError);
}

TEST_CASE("r2 hat") {
  auto r = r2_hat(0.935, Eigen::Vector2d(3.540, 3.607));
  CHECK(r[0] == doctest::Approx(0.930).epsilon(1e-3));
  CHECK(r[1] == doctest::Approx(1.0 - 0.935 * 0.935 / (3.607 * 3.607)).epsilon(1e-15));
  CHECK(r2_hat(3.33, Eigen::VectorXd::Constant(1, 4.69))[0] == doctest::Approx(0.4959).epsilon(1e-3));
  CHECK(r2_hat(1.0, Eigen::VectorXd::Constant(1, 1.0))[0] == 0.0);
  // BMA worse than a model: negative
  CHECK(r2_hat(2.0, Eigen::VectorXd::Constant(1, 1.0))[0] == -3.0);
  CHECK_THROWS_AS(r2_hat(-1.0, Eigen::VectorXd::Constant(1, 1.0)), DomainError);
  CHECK_THROWS_AS(r2_hat(1.0, Eigen::VectorXd::Constant(1, 0.0)), DomainError);
}

TEST_CASE("empirical quantile") {
  std::vector<double> v{3, 1, 2, 4};
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 1.0) == 4.0);
  CHECK(empirical_quantile(v, 0.5) == 2.5);
  CHECK(empirical_quantile({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), UsageError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.5), DomainError);
}

TEST_CASE("central interval") {
  Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(101, 0.0, 100.0);
  auto [lo, hi] = central_interval(d, 0.9);
  CHECK(lo == doctest::Approx(5.0));
  CHECK(hi == doctest::Approx(95.0));
  auto [l1, h1] = central_interval(d, 1.0 - 1e-12);
  CHECK(l1 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(h1 == doctest::Approx(100.0).epsilon(1e-9));

  Rng rng({1, 0});
  Eigen::VectorXd z(200000);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  auto [a, b] = central_interval(z, 0.95);
  CHECK(std::abs(a + 1.959964) < 0.03);
  CHECK(std::abs(b - 1.959964) < 0.03);

  Eigen::VectorXd sym(4);
  sym << -2, -1, 1, 2;
  auto [s0, s1] = central_interval(sym, 0.5);
  CHECK(s0 == -s1);
  CHECK_THROWS_AS(central_interval(sym, 1.0), DomainError);
  CHECK_THROWS_AS(central_interval(sym, 0.0), DomainError);
}

TEST_CASE("default levels") {
  auto l = default_levels();
  CHECK(l.size() == 20);
  CHECK(l[0] == doctest::Approx(0.05));
  CHECK(l[18] == doctest::Approx(0.95));
  CHECK(l[19] == 0.99);
}

TEST_CASE("calibrated predictive gives binomial coverage") {
  Rng rng({2, 0});
  const Eigen::Index n_test = 2000, n_draws = 1000;
  Eigen::MatrixXd draws(n_draws, n_test);
  Eigen::VectorXd truth(n_test);
  for (Eigen::Index j = 0; j < n_test; ++j) {
    const double mu = 3.0 * rng.normal();
    truth[j] = mu + rng.normal();
    for (Eigen::Index i = 0; i < n_draws; ++i) draws(i, j) = mu + rng.normal();
  }
  auto c = ecp_curve(draws, truth);
  CHECK(c.n_test == n_test);
  for (Eigen::Index l = 0; l < c.nominal_levels.size(); ++l) {
    const double p = c.nominal_levels[l];
    // binomial sd plus the quantile error of 1000 draws
    const double tol = 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(n_test)) + 0.01;
    CAPTURE(p);
    CHECK(std::abs(c.empirical_coverage[l] - p) < tol);
  }
  CHECK(c.mean_abs_deviation() < 0.02);
}

TEST_CASE("coverage curve properties") {
  Rng rng({3, 0});
  Eigen::MatrixXd draws(500, 7);
  for (Eigen::Index i = 0; i < draws.size(); ++i) draws.data()[i] = rng.normal();
  Eigen::VectorXd truth(7);
  for (Eigen::Index j = 0; j < 7; ++j) truth[j] = 2.0 * rng.normal();
  auto c = ecp_curve(draws, truth);
  for (Eigen::Index l = 0; l < c.nominal_levels.size(); ++l) {
    const double k = c.empirical_coverage[l] * 7.0;
    CHECK(std::abs(k - std::round(k)) < 1e-12);
    if (l > 0) CHECK(c.empirical_coverage[l] >= c.empirical_coverage[l - 1]);
  }

  // truths at the median are always inside
  Eigen::VectorXd med(7);
  for (Eigen::Index j = 0; j < 7; ++j) {
    std::vector<double> v(draws.col(j).data(), draws.col(j).data() + 500);
    med[j] = empirical_quantile(v, 0.5);
  }
  auto all = ecp_curve(draws, med);
  CHECK((all.empirical_coverage.array() == 1.0).all());

  // an over-narrow predictive under-covers
  Eigen::MatrixXd narrow = 0.2 * draws;
  Eigen::VectorXd t(7);
  for (Eigen::Index j = 0; j < 7; ++j) t[j] = 3.0 + j;
  CHECK(ecp_curve(narrow, t).mean_abs_deviation() > 0.4);

  CHECK_THROWS_AS(ecp_curve(draws, Eigen::VectorXd(3)), UsageError);
  CHECK_THROWS_AS(ecp_curve(draws, truth, Eigen::VectorXd::Constant(1, 1.2)), DomainError);
}

TEST_CASE("ecp csv") {
  CoverageCurve c;
  c.nominal_levels = Eigen::Vector2d(0.5, 0.9);
  c.empirical_coverage = Eigen::Vector2d(0.25, 1.0);
  std::ostringstream os;
  write_ecp_csv(os, c);
  CHECK(os.str() == "level,ecp\n0.5,0.25\n0.90000000000000002,1\n");
}

TEST_CASE("effective sample size") {
  Rng rng({4, 0});
  const Eigen::Index n = 100000;
  Eigen::VectorXd iid(n), ar(n);
  const double phi = 0.5;
  double x = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    iid[i] = rng.normal();
    x = phi * x + rng.normal();
    ar[i] = x;
  }
  CHECK(effective_sample_size(iid) == doctest::Approx(static_cast<double>(n)).epsilon(0.05));
  // integrated autocorrelation time (1 + phi) / (1 - phi) = 3
  CHECK(effective_sample_size(ar) == doctest::Approx(static_cast<double>(n) / 3.0).epsilon(0.08));
  CHECK(effective_sample_size(Eigen::VectorXd::Constant(50, 2.0)) == 50.0);
  CHECK(effective_sample_size(Eigen::Vector3d(1, 2, 3)) == 3.0);
}
