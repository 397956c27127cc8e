#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "bma/model.hpp"
#include "support.hpp"

using namespace bma;
using namespace bma::test;

namespace {

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

ModelSpec zero_model(double sigma) {
  ModelSpec s;
  s.name = "zero";
  s.response.fn = [](const Eigen::MatrixXd& X, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(X.rows()).eval(); };
  s.noise.fallback = Quantity::constant(sigma);
  return s;
}

ModelSpec gp_model(double eta, double rho, double sigma) {
  ModelSpec s = zero_model(sigma);
  s.name = "gp";
  DiscrepancyConfig d;
  d.eta = Quantity::constant(eta);
  d.length_scales = {Quantity::constant(rho)};
  s.discrepancy = d;
  return s;
}

Dataset line_data(Eigen::Index n, std::uint64_t seed) {
  Rng rng({seed, 0});
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    y[i] = 0.5 + 1.5 * X(i, 0) + 0.3 * rng.normal();
  }
  return make_data(X, y);
}

}  // namespace

TEST_CASE("dataset construction and lookup") {
  Eigen::MatrixXd X(3, 1);
  X << 1, 2, 3;
  Dataset d(X, Eigen::Vector3d(4, 5, 6), labels(3), {"a", "b", "c"});
  CHECK(d.size() == 3);
  CHECK(d.row_of("b") == 1);
  CHECK(d.has("c"));
  CHECK_FALSE(d.has("z"));
  CHECK_THROWS_AS((void)d.row_of("z"), UsageError);
  CHECK_THROWS_AS(Dataset(X, Eigen::Vector3d(4, 5, 6), labels(3), {"a", "a", "c"}), UsageError);
  CHECK_THROWS_AS(Dataset(X, Eigen::Vector2d(4, 5), labels(3), {"a", "b", "c"}), UsageError);
  std::vector<Eigen::Index> rows{2, 0};
  Dataset s = d.select(rows);
  CHECK(s.ids() == std::vector<PointId>{"c", "a"});
  CHECK(s.values()[0] == 6);
}

TEST_CASE("domain mask set operations") {
  Eigen::MatrixXd X(4, 1);
  X << -2, -1, 1, 2;
  Dataset d(X, Eigen::Vector4d::Zero(), labels(4), {"a", "b", "c", "d"});
  DomainMask neg = DomainMask::where(d, [&](Eigen::Index i) { return d.locations()(i, 0) < 0; });
  CHECK(neg == DomainMask{"a", "b"});
  DomainMask m{"b", "c"};
  CHECK((neg & m) == DomainMask{"b"});
  CHECK((neg | m) == DomainMask{"a", "b", "c"});
  CHECK((neg - m) == DomainMask{"a"});
  CHECK(neg.intersects(m));
  CHECK_FALSE(neg.intersects(DomainMask{"d"}));
  CHECK(DomainMask{"a"}.subset_of(neg));
  CHECK(DomainMask::all(d).size() == 4);
  CHECK(m.rows(d) == std::vector<Eigen::Index>{1, 2});
  CHECK_THROWS_AS((void)DomainMask{"zz"}.rows(d), UsageError);
}

TEST_CASE("log_likelihood examples") {
  Eigen::MatrixXd X(1, 1);
  X << 0.0;
  Dataset d = make_data(X, Eigen::VectorXd::Zero(1));
  ModelSpec s = zero_model(1.0);
  CHECK(log_likelihood(s, Eigen::VectorXd(0), d, DomainMask{}) == 0.0);
  CHECK(log_likelihood(s, Eigen::VectorXd(0), d, DomainMask::all(d)) == doctest::Approx(-0.5 * kLn2Pi).epsilon(1e-15));
}

TEST_CASE("log_likelihood with a discrepancy GP matches the dense 2x2 density") {
  Eigen::MatrixXd X(2, 1);
  X << 0.2, 1.1;
  Eigen::VectorXd y(2);
  y << 0.7, -0.4;
  Dataset d = make_data(X, y);
  const double eta = 1.3, rho = 0.8, sigma = 0.5;
  ModelSpec s = gp_model(eta, rho, sigma);
  Eigen::Matrix2d S;
  const double k = eta * eta * std::exp(-0.5 * std::pow((0.2 - 1.1) / rho, 2));
  S << eta * eta + sigma * sigma, k, k, eta * eta + sigma * sigma;
  S.diagonal().array() += 1e-10 * eta * eta;  // default jitter
  const double det = S(0, 0) * S(1, 1) - k * k;
  const double quad = (S(1, 1) * y[0] * y[0] - 2 * k * y[0] * y[1] + S(0, 0) * y[1] * y[1]) / det;
  const double oracle = -0.5 * quad - 0.5 * std::log(det) - kLn2Pi;
  CHECK(std::abs(log_likelihood(s, Eigen::VectorXd(0), d, DomainMask::all(d)) - oracle) < 1e-10);
}

TEST_CASE("log_likelihood additivity and GP joint density") {
  Dataset d = line_data(12, 3);
  ModelSpec lin = linear_model(1, Eigen::Vector2d(0, 0), Eigen::Vector2d(5, 5), 0.4);
  const Eigen::Vector2d phi(0.3, 1.4);
  const DomainMask all = DomainMask::all(d);
  DomainMask a{"p0", "p3", "p4", "p9"};
  const DomainMask b = all - a;
  CHECK(log_likelihood(lin, phi, d, all) ==
        doctest::Approx(log_likelihood(lin, phi, d, a) + log_likelihood(lin, phi, d, b)).epsilon(1e-13));

  // With a GP the likelihood is the joint density of residuals, not a sum.
  ModelSpec g = lin;
  DiscrepancyConfig dc;
  dc.eta = Quantity::constant(0.9);
  dc.length_scales = {Quantity::constant(1.2)};
  g.discrepancy = dc;
  Eigen::VectorXd r = d.values() - (phi[0] + phi[1] * d.locations().col(0).array()).matrix();
  Eigen::MatrixXd S = naive_kernel(d.locations(), d.locations(), 0.9, Eigen::VectorXd::Constant(1, 1.2));
  S.diagonal().array() += 0.4 * 0.4 + 1e-10 * 0.81;
  CHECK(std::abs(log_likelihood(g, phi, d, all) - dense_mvn_logpdf(r, S)) < 1e-8);
  CHECK(std::abs(log_likelihood(g, phi, d, all) - log_likelihood(g, phi, d, a) - log_likelihood(g, phi, d, b)) > 1e-3);

  // Conditional density is joint minus given.
  CHECK(conditional_log_likelihood(g, phi, d, b, a) ==
        doctest::Approx(log_likelihood(g, phi, d, all) - log_likelihood(g, phi, d, a)).epsilon(1e-13));
  CHECK(conditional_log_likelihood(lin, phi, d, b, a) == log_likelihood(lin, phi, d, b));
}

TEST_CASE("log_likelihood is invariant to row permutation") {
  Dataset d = line_data(15, 4);
  std::vector<Eigen::Index> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng({5, 0});
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  Dataset p = d.select(perm);
  ModelSpec lin = linear_model(1, Eigen::Vector2d(0, 0), Eigen::Vector2d(5, 5), 0.4);
  const Eigen::Vector2d phi(0.1, 1.2);
  CHECK(log_likelihood(lin, phi, d, DomainMask::all(d)) ==
        doctest::Approx(log_likelihood(lin, phi, p, DomainMask::all(p))).epsilon(1e-13));
  ModelSpec g = gp_model(1.0, 0.7, 0.3);
  CHECK(log_likelihood(g, Eigen::VectorXd(0), d, DomainMask::all(d)) ==
        doctest::Approx(log_likelihood(g, Eigen::VectorXd(0), p, DomainMask::all(p))).epsilon(1e-11));
}

TEST_CASE("log_likelihood errors") {
  Dataset d = line_data(4, 1);
  ModelSpec s = zero_model(1.0);
  s.domain = DomainMask{"p0", "p1"};
  CHECK_THROWS_AS(log_likelihood(s, Eigen::VectorXd(0), d, DomainMask{"p2"}), DomainViolationError);
  ModelSpec nan = zero_model(1.0);
  nan.response.fn = [](const Eigen::MatrixXd& X, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(X.rows(), std::nan("")).eval();
  };
  CHECK_THROWS_AS(log_likelihood(nan, Eigen::VectorXd(0), d, DomainMask::all(d)), ModelEvaluationError);
}

TEST_CASE("per-observable noise and responses") {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 2;
  Dataset d(X, Eigen::Vector3d(1, 2, 3), {"a", "b", "a"}, {"i", "j", "k"});
  ModelSpec s = zero_model(1.0);
  s.noise.by_type["b"] = Quantity::constant(2.0);
  Response one;
  one.fn = [](const Eigen::MatrixXd& Z, const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(Z.rows()).eval(); };
  s.response_by_type["a"] = one;
  const double expect = normal_logpdf(1, 1, 1) + normal_logpdf(2, 0, 2) + normal_logpdf(3, 1, 1);
  CHECK(log_likelihood(s, Eigen::VectorXd(0), d, DomainMask::all(d)) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("log_prior examples") {
  ModelSpec s = linear_model(1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 1.0);
  CHECK(log_prior(s, Eigen::Vector2d(0, 0)) == doctest::Approx(-kLn2Pi).epsilon(1e-15));

  ModelSpec g;
  g.name = "g";
  g.parameters = {{"eta", Prior::gamma(0.8, 1.0)}};
  CHECK(log_prior(g, Eigen::VectorXd::Constant(1, -0.5)) == kNegInf);

  ModelSpec m;
  m.name = "m";
  m.parameters = {{"a", Prior::normal(1.0, 2.0)}, {"b", Prior::gamma(1.8, 1.0)}};
  const Eigen::Vector2d phi(-0.3, 2.2);
  CHECK(log_prior(m, phi) == doctest::Approx(normal_logpdf(-0.3, 1.0, 2.0) + gamma_logpdf(2.2, 1.8, 1.0)).epsilon(1e-14));
}

TEST_CASE("prior densities and sampling") {
  CHECK(Prior::half_normal(2.0).log_density(1.0) ==
        doctest::Approx(std::log(2.0) + normal_logpdf(1.0, 0.0, 2.0)).epsilon(1e-14));
  CHECK(Prior::half_normal(2.0).log_density(-1.0) == kNegInf);
  CHECK(Prior::uniform(-1, 3).log_density(0.5) == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  CHECK(Prior::uniform(-1, 3).log_density(3.5) == kNegInf);
  CHECK(Prior::log_normal(0.2, 0.5).log_density(1.5) ==
        doctest::Approx(normal_logpdf(std::log(1.5), 0.2, 0.5) - std::log(1.5)).epsilon(1e-14));
  CHECK_THROWS_AS(Prior::normal(0, -1).validate(), DomainError);
  CHECK_THROWS_AS(Prior::uniform(2, 1).validate(), DomainError);

  Rng rng({99, 0});
  const int n = 100000;
  for (const Prior& p : {Prior::normal(1, 2), Prior::half_normal(3), Prior::gamma(0.8, 1.0), Prior::log_normal(0.1, 0.4),
                         Prior::uniform(-2, 5)}) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = p.sample(rng);
      REQUIRE(std::isfinite(p.log_density(x)));
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::abs(mean - p.mean()) < 5 * sd / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("model spec validation") {
  ModelSpec s = linear_model(1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 1.0);
  CHECK_NOTHROW(s.validate());
  ModelSpec dangling = s;
  dangling.response.theta_index = {0, 5};
  CHECK_THROWS_AS(dangling.validate(), ConfigError);
  ModelSpec noise = s;
  noise.noise.fallback = Quantity::parameter(7);
  CHECK_THROWS_AS(noise.validate(), ConfigError);
  ModelSpec dup = s;
  dup.parameters[1].name = dup.parameters[0].name;
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  ModelSpec w = s;
  w.prior_model_weight = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("predictive draws") {
  Eigen::MatrixXd X(1, 1);
  X << 0.0;
  Dataset d = make_data(X, Eigen::VectorXd::Zero(1));

  // sigma = 0 and no discrepancy: deterministic response
  ModelSpec det = linear_model(1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 0.0);
  Rng rng({1, 2});
  Eigen::RowVectorXd xs(1);
  xs << 2.0;
  for (int i = 0; i < 5; ++i) CHECK(predictive_draw(det, Eigen::Vector2d(1.0, 3.0), d, xs, "y", rng) == 7.0);

  // f = 0, sigma = 1: moments of 1e5 draws
  ModelSpec z = zero_model(1.0);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = predictive_draw(z, Eigen::VectorXd(0), d, xs, "y", rng);
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(std::sqrt(s2 / n - (s / n) * (s / n)) - 1.0) < 0.02);

  // same seed, same stream
  Rng r1({5, 5}), r2({5, 5});
  Eigen::MatrixXd q(3, 1);
  q << 0.1, 0.2, 0.3;
  CHECK(predictive_draws(z, Eigen::VectorXd(0), d, q, labels(3), r1) ==
        predictive_draws(z, Eigen::VectorXd(0), d, q, labels(3), r2));
}

TEST_CASE("predictive with discrepancy interpolates an exact observation") {
  Eigen::MatrixXd X(1, 1);
  X << 0.5;
  Dataset d = make_data(X, Eigen::VectorXd::Constant(1, 2.5));
  ModelSpec g = gp_model(1.0, 1.0, 1e-6);
  auto pm = predictive_moments(g, Eigen::VectorXd(0), d, X, labels(1));
  CHECK(std::abs(pm.mean[0] - 2.5) < 1e-4);
  CHECK(pm.variance[0] < 1e-8);
  Rng rng({3, 3});
  for (int i = 0; i < 20; ++i) CHECK(std::abs(predictive_draw(g, Eigen::VectorXd(0), d, X.row(0), "y", rng) - 2.5) < 1e-3);

  // Far from the data the discrepancy reverts to its prior.
  Eigen::MatrixXd far(1, 1);
  far << 50.0;
  auto pf = predictive_moments(g, Eigen::VectorXd(0), d, far, labels(1));
  CHECK(std::abs(pf.mean[0]) < 1e-8);
  CHECK(pf.variance[0] == doctest::Approx(1.0).epsilon(1e-8));
}
