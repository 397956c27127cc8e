#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "bma/domain.hpp"
#include "bma/ensemble.hpp"
#include "support.hpp"

using namespace bma;
using namespace bma::test;

namespace {

// Points sit at x = 0..n-1 so fixed_model can look its predictions up by row.
Dataset grid_data(const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd X(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = static_cast<double>(i);
  return make_data(X, Eigen::Map<const Eigen::VectorXd>(y.data(), n));
}

DomainMask mask_of(std::initializer_list<int> rows) {
  std::set<PointId> s;
  for (int r : rows) s.insert("p" + std::to_string(r));
  return DomainMask(s);
}

ChainSettings tiny_chain() {
  ChainSettings cs;
  cs.n_samples = 4;
  cs.burn_in = 4;
  return cs;
}

double log_evidence_fixed(const ModelSpec& s, const Dataset& d) {
  return log_likelihood(s, Eigen::VectorXd(0), d, s.effective_domain(d));
}

// Brute-force recursion for parameter-free models with diagonal noise, on
// row sets; written independently of the library recursion.
struct Brute {
  Dataset data;
  std::vector<std::set<int>> dom;
  std::vector<std::vector<double>> pred;
  std::vector<double> prior;
  double sigma = 1.0;

  double local(std::size_t l, const std::set<int>& t) const {
    double s = 0.0;
    for (int i : t) s += normal_logpdf(data.values()[i], pred[l][static_cast<std::size_t>(i)], sigma);
    return s;
  }

  double P(const std::set<int>& t, const std::set<int>& c) const {
    if (t.empty()) return 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < dom.size(); ++l) {
      std::set<int> tl, rest;
      for (int i : t) (dom[l].count(i) ? tl : rest).insert(i);
      if (tl.empty()) continue;
      std::set<int> c2 = c;
      c2.insert(tl.begin(), tl.end());
      num += prior[l] * std::exp(local(l, tl) + P(rest, c2));
      den += prior[l];
    }
    return std::log(num / den);
  }

  double factor(std::size_t k) const {
    std::set<int> all;
    for (const auto& d : dom) all.insert(d.begin(), d.end());
    std::set<int> t;
    for (int i : all) {
      if (!dom[k].count(i)) t.insert(i);
    }
    return P(t, dom[k]);
  }
};

struct Staircase {
  Dataset data;
  std::vector<ModelSpec> specs;
  Brute brute;
};

Staircase staircase(const std::vector<std::set<int>>& domains, std::vector<double> prior, std::uint64_t seed) {
  Rng rng({seed, 0});
  int n = 0;
  for (const auto& d : domains) n = std::max(n, *d.rbegin() + 1);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = rng.normal();
  Staircase s{grid_data(y), {}, Brute{grid_data(y), domains, {}, prior}};
  for (std::size_t k = 0; k < domains.size(); ++k) {
    std::vector<double> p(static_cast<std::size_t>(n));
    for (auto& v : p) v = 1.5 * rng.normal();
    ModelSpec m = fixed_model("m" + std::to_string(k), p);
    std::set<PointId> ids;
    for (int r : domains[k]) ids.insert("p" + std::to_string(r));
    m.domain = DomainMask(ids);
    m.prior_model_weight = prior[k];
    s.specs.push_back(m);
    s.brute.pred.push_back(p);
  }
  return s;
}

}  // namespace

TEST_CASE("partition of identical domains is a single class") {
  Dataset d = grid_data({0, 0, 0, 0});
  std::vector<ModelSpec> specs{fixed_model("a", {0, 0, 0, 0}), fixed_model("b", {0, 0, 0, 0})};
  auto p = build_partition(specs, d);
  REQUIRE(p.classes.size() == 1);
  CHECK(p.classes[0] == std::vector<std::size_t>{0, 1});
  CHECK(p.common_core == DomainMask::all(d));
  CHECK(p.all == DomainMask::all(d));
  CHECK(p.union_check);
  CHECK(p.warnings.empty());
}

TEST_CASE("partition with a shared core") {
  // 10 points; a covers 0..5, b covers 4..9: core {4, 5}, complements of size 4.
  Dataset d = grid_data(std::vector<double>(10, 0.0));
  auto a = fixed_model("a", std::vector<double>(10, 0.0));
  auto b = a;
  b.name = "b";
  a.domain = mask_of({0, 1, 2, 3, 4, 5});
  b.domain = mask_of({4, 5, 6, 7, 8, 9});
  auto p = build_partition({a, b}, d);
  CHECK(p.common_core == mask_of({4, 5}));
  CHECK((p.all - p.masks[0]).size() == 4);
  CHECK((p.all - p.masks[1]).size() == 4);
  CHECK(p.classes.size() == 1);
}

TEST_CASE("disjoint domains split into classes") {
  Dataset d = grid_data({0, 0, 0, 0});
  auto a = fixed_model("a", {0, 0, 0, 0});
  auto b = fixed_model("b", {0, 0, 0, 0});
  auto e = fixed_model("empty", {0, 0, 0, 0});
  a.domain = mask_of({0, 1});
  b.domain = mask_of({2, 3});
  e.domain = DomainMask{};
  auto p = build_partition({a, b, e}, d);
  REQUIRE(p.classes.size() == 2);
  CHECK(p.classes[0] == std::vector<std::size_t>{0, 2});
  CHECK(p.classes[1] == std::vector<std::size_t>{1, 2});
  CHECK(p.warnings.size() == 1);
  CHECK(p.common_core.empty());
  CHECK(p.class_data(0) == mask_of({0, 1}));
}

TEST_CASE("uncovered point is a coverage error") {
  Dataset d = grid_data({0, 0, 0});
  auto a = fixed_model("a", {0, 0, 0});
  a.domain = mask_of({0, 1});
  CHECK_THROWS_AS(build_partition({a}, d), CoverageError);
  CHECK_THROWS_AS(build_partition({}, d), UsageError);
}

TEST_CASE("posterior cache") {
  Dataset d = grid_data({0.1, -0.2, 0.3});
  std::vector<ModelSpec> specs{linear_model(0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 0.5)};
  specs[0].response = polynomial_response(0);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0}, 500);
  const auto& prior = cache.get(0, DomainMask{});
  CHECK(prior.size() == 500);
  CHECK(prior.acceptance_rate == 1.0);
  CHECK(std::abs(prior.draws.col(0).mean()) < 4.0 / std::sqrt(500.0));
  const auto* again = &cache.get(0, DomainMask{});
  CHECK(again == &prior);
  CHECK(cache.size() == 1);
  const auto& post = cache.get(0, mask_of({0, 1}));
  CHECK(post.size() == 4);
  CHECK(cache.size() == 2);

  PosteriorCache other(specs, d, tiny_chain(), {1, 0}, 500);
  CHECK(other.get(0, DomainMask{}).draws == prior.draws);
}

TEST_CASE("two-model corrective factor") {
  Dataset d = grid_data({0.2, -0.4, 1.0});
  auto a = fixed_model("a", {0, 0, 0});
  auto b = linear_model(0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 0.7, "b");
  a.domain = mask_of({0, 1});
  PosteriorSamples point;
  point.draws = Eigen::MatrixXd::Constant(20, 1, 0.3);
  // empty complement
  auto full = a;
  full.domain.reset();
  CHECK(corrective_factor_two_models(full, b, d, point).value == 0.0);
  // delta posterior: exactly the likelihood of the missing point
  auto f = corrective_factor_two_models(a, b, d, point);
  CHECK(f.value == doctest::Approx(normal_logpdf(1.0, 0.3, 0.7)).epsilon(1e-14));
  CHECK(f.standard_error == 0.0);
  // missing point outside B
  auto narrow = b;
  narrow.domain = mask_of({0});
  CHECK_THROWS_AS(corrective_factor_two_models(a, narrow, d, point), CoverageError);
  PosteriorSamples none;
  CHECK_THROWS_AS(corrective_factor_two_models(a, b, d, none), UsageError);
}

TEST_CASE("general recursion with two models equals the two-model factor") {
  Rng rng({2, 0});
  std::vector<double> y(6);
  for (auto& v : y) v = rng.normal();
  Dataset d = grid_data(y);
  auto a = linear_model(0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0), 1.0, "a");
  auto b = linear_model(0, Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Ones(1), 0.8, "b");
  a.domain = mask_of({0, 1, 2, 3});
  b.domain = mask_of({2, 3, 4, 5});
  std::vector<ModelSpec> specs{a, b};
  auto p = build_partition(specs, d);
  ChainSettings cs;
  cs.n_samples = 2000;
  cs.burn_in = 500;
  PosteriorCache cache(specs, d, cs, {3, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  auto fa = corrective_factor_two_models(a, b, d, cache.get(1, p.masks[0] & p.masks[1]));
  auto fb = corrective_factor_two_models(b, a, d, cache.get(0, p.masks[0] & p.masks[1]));
  CHECK(ledger.log_factors[0] == doctest::Approx(fa.value).epsilon(1e-13));
  CHECK(ledger.log_factors[1] == doctest::Approx(fb.value).epsilon(1e-13));
  CHECK(ledger.standard_errors[0] == doctest::Approx(fa.standard_error).epsilon(1e-12));
}

TEST_CASE("equal domains give zero correction") {
  Dataset d = grid_data({0.1, 0.2, 0.3});
  std::vector<ModelSpec> specs{fixed_model("a", {0, 0, 0}), fixed_model("b", {1, 1, 1})};
  auto p = build_partition(specs, d);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  CHECK((ledger.log_factors.array() == 0.0).all());
  CHECK((ledger.standard_errors.array() == 0.0).all());
}

TEST_CASE("general recursion matches brute force") {
  const std::vector<std::vector<std::set<int>>> layouts{
      {{0, 1}, {1, 2}, {2}},
      {{0}, {0, 1}, {1, 2}},
      {{0, 1, 2}, {2, 3}, {3, 4, 5}, {0, 5}},
      {{0, 1}, {1, 2, 3}, {3, 4}, {4, 5, 0}},
  };
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const auto& dom = layouts[li];
    std::vector<double> prior(dom.size());
    for (std::size_t k = 0; k < prior.size(); ++k) prior[k] = 1.0 + 0.5 * static_cast<double>(k);
    auto s = staircase(dom, prior, 40 + li);
    auto p = build_partition(s.specs, s.data);
    for (bool memo : {true, false}) {
      PosteriorCache cache(s.specs, s.data, tiny_chain(), {5, li});
      CorrectionSettings cfg;
      cfg.memoize = memo;
      auto ledger = corrective_factor_general(p, s.specs, s.data, cache, cfg);
      for (std::size_t k = 0; k < dom.size(); ++k) {
        CAPTURE(li);
        CAPTURE(k);
        CAPTURE(memo);
        CHECK(std::abs(ledger.log_factors[static_cast<Eigen::Index>(k)] - s.brute.factor(k)) < 1e-12);
        CHECK(ledger.standard_errors[static_cast<Eigen::Index>(k)] == 0.0);
      }
    }
  }
}

TEST_CASE("memoization only saves work") {
  auto s = staircase({{0, 1, 2}, {2, 3}, {3, 4, 5}, {0, 5}}, {1, 1, 1, 1}, 7);
  auto p = build_partition(s.specs, s.data);
  PosteriorCache c1(s.specs, s.data, tiny_chain(), {1, 0});
  PosteriorCache c2(s.specs, s.data, tiny_chain(), {1, 0});
  CorrectionSettings memo, plain;
  plain.memoize = false;
  auto a = corrective_factor_general(p, s.specs, s.data, c1, memo);
  auto b = corrective_factor_general(p, s.specs, s.data, c2, plain);
  CHECK(a.log_factors == b.log_factors);
  CHECK(a.evaluations <= b.evaluations);
}

TEST_CASE("evidence-ratio estimator agrees for parameter-free models") {
  auto s = staircase({{0, 1}, {1, 2, 3}, {3, 0}}, {1, 2, 1}, 9);
  auto p = build_partition(s.specs, s.data);
  PosteriorCache cache(s.specs, s.data, tiny_chain(), {1, 0});
  CorrectionSettings cfg;
  cfg.estimator = LocalEstimator::EvidenceRatio;
  cfg.evidence_draws = 64;
  auto ledger = corrective_factor_general(p, s.specs, s.data, cache, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(ledger.log_factors[static_cast<Eigen::Index>(k)] == doctest::Approx(s.brute.factor(k)).epsilon(1e-12));
  }
}

TEST_CASE("evidence-ratio and posterior-draws agree within error on a conjugate model") {
  Rng rng({11, 0});
  std::vector<double> y(5);
  for (auto& v : y) v = 0.3 + rng.normal();
  Dataset d = grid_data(y);
  auto a = linear_model(0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 1.0, "a");
  auto b = linear_model(0, Eigen::VectorXd::Constant(1, 0.2), Eigen::VectorXd::Ones(1), 1.0, "b");
  a.domain = mask_of({0, 1, 2});
  b.domain = mask_of({2, 3, 4});
  std::vector<ModelSpec> specs{a, b};
  auto p = build_partition(specs, d);
  // oracle: ln p(y3, y4 | y2, b) = Z_b({2,3,4}) - Z_b({2})
  auto oracle_z = [&](std::vector<Eigen::Index> rows) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(rows.size()), 1);
    Eigen::VectorXd yy(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) yy[static_cast<Eigen::Index>(i)] = d.values()[rows[i]];
    return conjugate_log_marginal(G, yy, Eigen::VectorXd::Constant(1, 0.2), Eigen::VectorXd::Ones(1), 1.0);
  };
  const double oracle = oracle_z({2, 3, 4}) - oracle_z({2});

  CorrectionSettings ratio;
  ratio.estimator = LocalEstimator::EvidenceRatio;
  ratio.evidence_draws = 100000;
  ratio.evidence_rng = {12, 0};
  PosteriorCache c1(specs, d, {}, {13, 0});
  auto lr = corrective_factor_general(p, specs, d, c1, ratio);
  CHECK(std::abs(lr.log_factors[0] - oracle) < 3 * lr.standard_errors[0]);

  ChainSettings cs;
  cs.n_samples = 20000;
  PosteriorCache c2(specs, d, cs, {14, 0});
  auto lp = corrective_factor_general(p, specs, d, c2);
  // chain draws are correlated; allow the ESS loss of a random walk
  CHECK(std::abs(lp.log_factors[0] - oracle) < 0.05);
}

TEST_CASE("scenario with an empty model") {
  // m1 fits, m2 is off by 2 everywhere, m0 predicts nothing.
  Dataset d = grid_data({0.1, -0.1, 0.05});
  auto m0 = fixed_model("m0", {0, 0, 0});
  m0.domain = DomainMask{};
  auto m1 = fixed_model("m1", {0, 0, 0});
  auto m2 = fixed_model("m2", {2, 2, 2});
  std::vector<ModelSpec> specs{m0, m1, m2};
  const Eigen::Vector3d prior = Eigen::Vector3d::Constant(1.0 / 3.0);
  Eigen::Vector3d log_ev;
  for (int k = 0; k < 3; ++k) log_ev[k] = log_evidence_fixed(specs[static_cast<std::size_t>(k)], d);
  CHECK(log_ev[0] == 0.0);

  auto independent = posterior_model_weights(prior, log_ev, Eigen::Vector3d::Zero());
  const auto& wi = independent.posterior_weights;
  CHECK(wi[0] > wi[1]);
  CHECK(wi[0] > wi[2]);

  auto p = build_partition(specs, d);
  REQUIRE(p.classes.size() == 1);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  auto corrected = posterior_model_weights(prior, log_ev, ledger.log_factors);
  const auto& wc = corrected.posterior_weights;
  CHECK(wc[1] > wc[0]);
  CHECK(wc[0] > wc[2]);
  CHECK(rank_by_weight(wc) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("scenario with a withholding model") {
  // A: deviation 0 at a, 50 at b. B: 1.001 at a, silent at b.
  Dataset d = grid_data({0.0, 0.0});
  auto A = fixed_model("A", {0.0, 50.0});
  auto B = fixed_model("B", {1.001, 0.0});
  B.domain = mask_of({0});
  std::vector<ModelSpec> specs{A, B};
  const Eigen::Vector2d prior(0.5, 0.5);
  const Eigen::Vector2d log_ev(log_evidence_fixed(A, d), log_evidence_fixed(B, d));

  auto independent = posterior_model_weights(prior, log_ev, Eigen::Vector2d::Zero());
  CHECK(independent.posterior_weights[1] > independent.posterior_weights[0]);

  auto p = build_partition(specs, d);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  CHECK(ledger.log_factors[0] == 0.0);
  CHECK(ledger.log_factors[1] == doctest::Approx(normal_logpdf(0.0, 50.0, 1.0)).epsilon(1e-14));
  auto corrected = posterior_model_weights(prior, log_ev, ledger.log_factors);
  CHECK(corrected.posterior_weights[0] > corrected.posterior_weights[1]);
}

TEST_CASE("identical full domains reduce to classical weights") {
  Rng rng({21, 0});
  std::vector<double> y(8);
  for (auto& v : y) v = rng.normal();
  Dataset d = grid_data(y);
  std::vector<ModelSpec> specs;
  Eigen::VectorXd log_ev(4), prior(4);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> p(8);
    for (auto& v : p) v = rng.normal();
    specs.push_back(fixed_model("m" + std::to_string(k), p));
    log_ev[k] = log_evidence_fixed(specs.back(), d);
    prior[k] = 0.1 * (k + 1);
  }
  auto p = build_partition(specs, d);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  auto corrected = posterior_model_weights(prior, log_ev, ledger.log_factors);
  const Eigen::VectorXd classical = normalize_log_weights((prior.array().log() + log_ev.array()).matrix());
  CHECK((corrected.posterior_weights - classical).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adding a constant to every model's correction leaves weights unchanged") {
  const Eigen::Vector3d prior(0.2, 0.3, 0.5), log_ev(-3.0, -2.5, -4.0), corr(-1.0, -0.2, 0.0);
  auto a = posterior_model_weights(prior, log_ev, corr);
  auto b = posterior_model_weights(prior, log_ev, (corr.array() - 7.5).matrix());
  CHECK((a.posterior_weights - b.posterior_weights).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("posterior mixing weights") {
  auto s = staircase({{0, 1}, {1, 2}, {2, 0}}, {1, 1, 1}, 3);
  auto p = build_partition(s.specs, s.data);
  PosteriorCache cache(s.specs, s.data, tiny_chain(), {1, 0});
  CorrectionSettings cfg;
  cfg.mixing = MixingMode::Posterior;
  CHECK_THROWS_AS(corrective_factor_general(p, s.specs, s.data, cache, cfg), UsageError);
  cfg.mixing_weights = Eigen::Vector3d(0.7, 0.2, 0.1);
  s.brute.prior = {0.7, 0.2, 0.1};
  auto ledger = corrective_factor_general(p, s.specs, s.data, cache, cfg);
  CHECK(ledger.mixing == MixingMode::Posterior);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(ledger.log_factors[static_cast<Eigen::Index>(k)] == doctest::Approx(s.brute.factor(k)).epsilon(1e-12));
  }
}

TEST_CASE("impossible data gives a minus infinity factor") {
  Dataset d = grid_data({0.0, 1.0});
  auto a = fixed_model("a", {0.0, 0.0});
  // b's likelihood at point 1 underflows to zero
  auto b = fixed_model("b", {0.0, 1e300});
  a.domain = mask_of({0});
  std::vector<ModelSpec> specs{a, b};
  auto p = build_partition(specs, d);
  PosteriorCache cache(specs, d, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, specs, d, cache);
  CHECK(ledger.log_factors[0] == kNegInf);
  auto j = to_json(ledger, specs);
  CHECK(j["factors"]["a"]["log_factor"] == "-inf");
}

TEST_CASE("ledger json") {
  auto s = staircase({{0, 1}, {1, 2}}, {1, 1}, 4);
  auto p = build_partition(s.specs, s.data);
  PosteriorCache cache(s.specs, s.data, tiny_chain(), {1, 0});
  auto ledger = corrective_factor_general(p, s.specs, s.data, cache);
  auto j = to_json(ledger, s.specs);
  CHECK(j["mixing"] == "prior");
  CHECK(j["factors"].size() == 2);
  CHECK(j["factors"]["m0"]["log_factor"].get<double>() == ledger.log_factors[0]);
  CHECK(j["evaluations"] == ledger.evaluations);
  REQUIRE(j["trace"].size() == ledger.trace.size());
  CHECK(j["trace"][0]["target"].is_array());
  CHECK(j["trace"][0]["terms"][0].contains("log_local"));
}

TEST_CASE("local mixture from point masses") {
  std::vector<ModelSpec> specs{fixed_model("zero", {0}), fixed_model("one", {0})};
  specs[1].coverage = [](const Eigen::RowVectorXd& x, const std::string&) { return x[0] > 0.0; };
  const Eigen::Vector2d w(0.6, 0.4);
  Eigen::MatrixXd xs(2, 1);
  xs << 1.0, -1.0;
  std::vector<Eigen::MatrixXd> per{Eigen::MatrixXd::Zero(10, 2), Eigen::MatrixXd::Ones(10, 2)};
  Rng rng({1, 0});
  auto mix = local_mixture_predict(w, specs, per, xs, labels(2), 20000, rng);
  CHECK(mix.contributors[0] == std::vector<std::size_t>{0, 1});
  CHECK(mix.contributors[1] == std::vector<std::size_t>{0});
  const double se = std::sqrt(0.24 / 20000.0);
  CHECK(std::abs(mix.draws.col(0).mean() - 0.4) < 4 * se);
  CHECK((mix.draws.col(1).array() == 0.0).all());

  std::vector<PredictiveMoments> mom(2);
  mom[0] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  mom[1] = {Eigen::Vector2d::Ones(), Eigen::Vector2d::Zero()};
  auto lm = local_mixture_moments(w, specs, mom, xs, labels(2));
  CHECK(lm.mean[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(lm.variance[0] == doctest::Approx(0.24).epsilon(1e-14));
  CHECK(lm.mean[1] == 0.0);
  CHECK(lm.variance[1] == 0.0);
}

TEST_CASE("local mixture errors") {
  std::vector<ModelSpec> specs{fixed_model("a", {0}), fixed_model("b", {0})};
  for (auto& s : specs) s.coverage = [](const Eigen::RowVectorXd& x, const std::string&) { return x[0] > 0.0; };
  Eigen::MatrixXd xs = Eigen::MatrixXd::Constant(1, 1, -1.0);
  std::vector<PredictiveMoments> mom(2, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)});
  CHECK_THROWS_AS(local_mixture_moments(Eigen::Vector2d(0.5, 0.5), specs, mom, xs, labels(1)), CoverageError);
  xs(0, 0) = 1.0;
  CHECK_THROWS_AS(local_mixture_moments(Eigen::Vector2d(0.0, 0.0), specs, mom, xs, labels(1)), DegenerateWeightsError);
  Rng rng({1, 0});
  CHECK_THROWS_AS(local_mixture_predict(Eigen::Vector2d(0.5, 0.5), specs, {Eigen::MatrixXd::Zero(2, 1)}, xs,
                                        labels(1), 10, rng),
                  UsageError);
}

TEST_CASE("ranking and local model selection") {
  CHECK(rank_by_weight(Eigen::Vector4d(0.1, 0.4, 0.4, 0.1)) == std::vector<std::size_t>{1, 2, 0, 3});
  std::vector<ModelSpec> specs{fixed_model("a", {0}), fixed_model("b", {0}), fixed_model("c", {0})};
  specs[1].coverage = [](const Eigen::RowVectorXd& x, const std::string&) { return x[0] < 0.0; };
  specs[2].coverage = [](const Eigen::RowVectorXd&, const std::string& o) { return o == "mass"; };
  const auto rank = rank_by_weight(Eigen::Vector3d(0.2, 0.5, 0.3));
  Eigen::RowVectorXd x(1);
  x << -1.0;
  CHECK(local_model_select(rank, specs, x, "y") == 1);
  x << 1.0;
  CHECK(local_model_select(rank, specs, x, "mass") == 2);
  CHECK(local_model_select(rank, specs, x, "y") == 0);
  CHECK(covering_models(specs, x, "y") == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(local_model_select({1}, specs, x, "y"), CoverageError);
}

TEST_CASE("mode and estimator names") {
  CHECK(to_string(MixingMode::Prior) == "prior");
  CHECK(to_string(MixingMode::Posterior) == "posterior");
  CHECK(to_string(LocalEstimator::EvidenceRatio) == "evidence-ratio");
  CHECK(local_estimator_from_string("posterior-draws") == LocalEstimator::PosteriorDraws);
  CHECK_THROWS_AS(local_estimator_from_string("harmonic"), UsageError);
}
