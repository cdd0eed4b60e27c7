#include "oracles.hpp"
#include "pppv/error.hpp"
#include "pppv/ppp_engine.hpp"
#include "pppv/simulation.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <numeric>
#include <random>

using namespace pppv;

namespace {

ObservedSample regular_sample(int n, std::uint64_t seed) {
  DgpConfig config;
  config.n = n;
  config.seed = seed;
  return gen_regular(config).observed;
}

StatisticSpec difference_in_means() {
  StatisticSpec spec;
  spec.estimator = Estimator::reg;
  spec.studentized = false;
  return spec;
}

ObservedSample six_units() {
  Vector z(6);
  z << 1, 0, 1, 0, 1, 0;
  Vector y(6);
  y << 3.1, 0.4, 2.2, 1.0, 1.9, -0.3;
  return make_sample(z, y, Matrix(6, 0));
}

}  // namespace

TEST_CASE("unstudentized regression statistic on exactly linear outcomes") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = 60;
  Vector z(n);
  Vector y(n);
  Matrix x(n, 1);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = normal(rng);
    z(i) = i % 2;
    y(i) = z(i) == 1.0 ? 1.5 + 0.8 * x(i, 0) : 0.25 - 0.4 * x(i, 0);
  }
  const auto s = make_sample(z, y, x);
  StatisticSpec spec = default_spec(s, Estimator::reg, false);
  const double expected = std::abs(1.25 + 1.2 * x.col(0).mean());
  const auto t = compute_statistic(s.z, s, spec);
  REQUIRE(t.has_value());
  CHECK(std::abs(*t - expected) < 1e-10);
}

TEST_CASE("constant outcome gives a zero statistic and p-values of one") {
  auto s = regular_sample(120, 2);
  s.y.setConstant(1.25);
  for (const auto e : {Estimator::ipw, Estimator::reg, Estimator::dr}) {
    const auto spec = default_spec(s, e, false);
    const auto t = compute_statistic(s.z, s, spec);
    REQUIRE(t.has_value());
    CHECK(*t == 0.0);
  }
  const auto spec = default_spec(s, Estimator::dr, false);
  CHECK(ppp_algorithm_a(s, spec, 100, 100, 1).p_value == 1.0);
  CHECK(ppp_algorithm_b(s, spec, 10, 100, 10, 1).p_value == 1.0);
  CHECK(frt_pvalue(s, spec, CompleteRandomization{60}, 100, 1).p_value == 1.0);
}

TEST_CASE("studentized statistic is the unstudentized one over the sandwich se") {
  const auto s = regular_sample(300, 4);
  for (const auto e : {Estimator::ipw, Estimator::reg, Estimator::dr}) {
    const auto raw = compute_statistic(s.z, s, default_spec(s, e, false));
    const auto stud = compute_statistic(s.z, s, default_spec(s, e, true));
    const auto est = estimate_effect(s, e, all_columns(4), all_columns(4));
    REQUIRE(raw.has_value());
    REQUIRE(stud.has_value());
    CHECK(std::abs(*stud - *raw / *est.se) <= 1e-12 * *stud);
  }
}

TEST_CASE("statistic is undefined for an empty arm") {
  const auto s = regular_sample(80, 5);
  const auto spec = default_spec(s, Estimator::dr, true);
  CHECK_FALSE(compute_statistic(Vector::Zero(80), s, spec).has_value());
  CHECK_FALSE(compute_statistic(Vector::Ones(80), s, spec).has_value());
}

TEST_CASE("ties count as extreme") {
  CHECK(at_least_as_extreme(1.0, 1.0));
  CHECK(at_least_as_extreme(1.0 - 1e-13, 1.0));
  CHECK_FALSE(at_least_as_extreme(0.99, 1.0));
  CHECK(at_least_as_extreme(0.0, 0.0));
}

TEST_CASE("algorithm A p-value bounds, determinism and thread invariance") {
  const auto s = regular_sample(200, 6);
  const auto spec = default_spec(s, Estimator::dr, true);
  const auto a = ppp_algorithm_a(s, spec, 200, 200, 17, 1);
  const auto b = ppp_algorithm_a(s, spec, 200, 200, 17, 4);
  CHECK(a.p_value == b.p_value);
  CHECK(a.t_observed == b.t_observed);
  CHECK(a.p_value >= 1.0 / 201.0);
  CHECK(a.p_value <= 1.0);
  CHECK(a.R == 200);
  CHECK(a.method == PMethod::ppp_a);
  const double count = a.p_value * static_cast<double>(1 + a.R - a.n_degenerate) - 1.0;
  CHECK(std::abs(count - std::round(count)) < 1e-9);
}

TEST_CASE("algorithm B p-value bounds and thread invariance") {
  const auto s = regular_sample(150, 7);
  const auto spec = default_spec(s, Estimator::dr, true);
  const auto a = ppp_algorithm_b(s, spec, 20, 200, 30, 5, 1);
  const auto b = ppp_algorithm_b(s, spec, 20, 200, 30, 5, 3);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value >= 1.0 / 31.0);
  CHECK(a.p_value <= 1.0);
  CHECK(a.R == 20);
  CHECK(a.S == 30);
}

TEST_CASE("algorithm B with a single posterior draw is a fixed-propensity randomization test") {
  const auto s = regular_sample(150, 8);
  const auto spec = default_spec(s, Estimator::dr, true);
  const auto fit = fit_logistic(s);
  PosteriorDraws one;
  one.draws = fit.theta.transpose();
  const auto b = ppp_algorithm_b(s, spec, one, 20000, 3, 4);
  const auto frt = frt_pvalue(s, spec, BernoulliDesign{fit.e_hat}, 20000, 4, 4);
  CHECK(std::abs(b.p_value - frt.p_value) < 0.02);
}

TEST_CASE("randomization test matches exact enumeration") {
  const auto s = six_units();
  std::vector<double> y(6);
  std::vector<int> z(6);
  for (Index i = 0; i < 6; ++i) {
    y[static_cast<std::size_t>(i)] = s.y(i);
    z[static_cast<std::size_t>(i)] = static_cast<int>(s.z(i));
  }
  const double exact = oracle::exact_complete_randomization_p(y, z);
  const auto report = frt_pvalue(s, difference_in_means(), CompleteRandomization{3}, 100000, 1, 4);
  CHECK(std::abs(report.p_value - exact) < 0.01);
  CHECK(report.method == PMethod::frt);
  CHECK(report.S == 100000);
}

TEST_CASE("bernoulli design on large n approximates complete randomization") {
  const auto s = regular_sample(400, 9);
  const auto spec = difference_in_means();
  const auto complete = frt_pvalue(s, spec, CompleteRandomization{200}, 20000, 1, 4);
  const auto bern = frt_pvalue(s, spec, parse_design("bernoulli:p=0.5"), 20000, 2, 4);
  CHECK(std::abs(complete.p_value - bern.p_value) < 0.02);
}

TEST_CASE("design parsing and errors") {
  const auto d = parse_design("complete:m=10");
  REQUIRE(std::holds_alternative<CompleteRandomization>(d));
  CHECK(std::get<CompleteRandomization>(d).m == 10);
  CHECK(describe(d) == "complete:m=10");
  CHECK(describe(parse_design("bernoulli:p=0.25")) == "bernoulli:p=0.25");
  CHECK_THROWS_AS(parse_design("complete:n=3"), Error);
  CHECK_THROWS_AS(parse_design("stratified"), Error);

  const auto s = six_units();
  for (const Index m : {Index{0}, Index{6}, Index{-1}}) {
    try {
      frt_pvalue(s, difference_in_means(), CompleteRandomization{m}, 10, 1);
      FAIL("expected a design error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::design);
    }
  }
  CHECK_THROWS_AS(frt_pvalue(s, difference_in_means(), BernoulliDesign{Vector::Constant(1, 1.0)}, 10, 1),
                  Error);
}

TEST_CASE("randomization test is valid under its own design") {
  const int reps = 400;
  const int S = 200;
  int rejections = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_rng(99, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(20);
    for (Index i = 0; i < 20; ++i) y(i) = normal(rng);
    std::vector<Index> order(20);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Vector z = Vector::Zero(20);
    for (int i = 0; i < 10; ++i) z(order[static_cast<std::size_t>(i)]) = 1.0;
    const auto s = make_sample(z, y, Matrix(20, 0));
    const auto p = frt_pvalue(s, difference_in_means(), CompleteRandomization{10}, S,
                              static_cast<std::uint64_t>(r))
                       .p_value;
    rejections += p <= 0.1 ? 1 : 0;
  }
  const double rate = static_cast<double>(rejections) / reps;
  CHECK(rate <= 0.1 + 2.0 / S + 3.0 * oracle::binomial_se(0.1, reps));
}

TEST_CASE("normal approximation p-values") {
  CHECK(std::abs(normal_two_sided(1.959964) - 0.05) < 1e-6);
  CHECK(normal_two_sided(0.0) == 1.0);
  const boost::math::normal_distribution<double> phi;
  double previous = 2.0;
  for (int k = 0; k < 100; ++k) {
    const double t = 0.08 * k;
    const double p = normal_two_sided(t);
    CHECK(p < previous);
    CHECK(std::abs(p - 2.0 * boost::math::cdf(boost::math::complement(phi, t))) < 1e-10);
    previous = p;
  }

  const auto s = regular_sample(300, 10);
  const auto spec = default_spec(s, Estimator::dr, true);
  const auto report = normal_pvalue(s, spec);
  const auto est = estimate_effect(s, Estimator::dr, all_columns(4), all_columns(4));
  CHECK(report.t_observed == doctest::Approx(*est.t_abs).epsilon(1e-12));
  CHECK(report.p_value == doctest::Approx(normal_two_sided(*est.t_abs)).epsilon(1e-12));
  CHECK_THROWS_AS(normal_pvalue(s, default_spec(s, Estimator::dr, false)), Error);
}

TEST_CASE("normal approximation with a bootstrap standard error") {
  const auto s = regular_sample(200, 11);
  auto spec = default_spec(s, Estimator::dr, true);
  spec.se_method = SeMethod::bootstrap;
  spec.bootstrap_B = 200;
  spec.bootstrap_seed = 3;
  const auto a = normal_pvalue(s, spec, 1);
  const auto b = normal_pvalue(s, spec, 4);
  CHECK(a.p_value == b.p_value);
  const auto boot = bootstrap_se(s, Estimator::dr, all_columns(4), all_columns(4), 200, 3);
  const auto est = estimate_effect(s, Estimator::dr, all_columns(4), all_columns(4));
  CHECK(a.t_observed == doctest::Approx(std::abs(est.tau_hat) / boot.se).epsilon(1e-12));
}

TEST_CASE("many undefined synthetic statistics attach a warning") {
  // Three treated units out of 40: most synthetic assignments leave the
  // treated-arm regression without enough units.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z = Vector::Zero(40);
  z(0) = z(1) = z(2) = z(3) = 1.0;
  Vector y(40);
  Matrix x(40, 2);
  for (Index i = 0; i < 40; ++i) {
    y(i) = normal(rng);
    x(i, 0) = normal(rng);
    x(i, 1) = normal(rng);
  }
  const auto s = make_sample(z, y, x);
  const auto report = frt_pvalue(s, default_spec(s, Estimator::reg, false),
                                 BernoulliDesign{Vector::Constant(1, 0.08)}, 200, 1);
  CHECK(report.n_degenerate > 40);
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(report.warnings[0].find("unreliable") != std::string::npos);
}

TEST_CASE("observed statistic must be defined") {
  Vector z = Vector::Zero(30);
  z(0) = z(1) = 1.0;
  Matrix x(30, 2);
  x.setRandom();
  const auto s = make_sample(z, Vector::LinSpaced(30, 0, 1), x);
  try {
    ppp_algorithm_a(s, default_spec(s, Estimator::dr, true), 10, 10, 1);
    FAIL("expected undefined statistic");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::undefined_statistic);
  }
}

TEST_CASE("report serializes as one csv row") {
  PValueReport r;
  r.method = PMethod::ppp_b;
  r.estimator = Estimator::ipw;
  r.studentized = true;
  r.p_value = 0.25;
  r.t_observed = 1.5;
  r.R = 200;
  r.S = 200;
  r.n_degenerate = 3;
  r.seed = 7;
  CHECK(report_csv_header() == "method,estimator,studentized,p_value,t_observed,R,S,n_degenerate,seed");
  CHECK(to_csv_row(r) == "ppp_b,ipw,1,0.25,1.5,200,200,3,7");
}

TEST_CASE("frozen outcome mode runs and agrees on the observed statistic") {
  const auto s = regular_sample(200, 13);
  auto spec = default_spec(s, Estimator::dr, true);
  const auto full = compute_statistic(s.z, s, spec);
  spec.freeze_outcome = true;
  const auto frozen = compute_statistic(s.z, s, spec);
  REQUIRE(full.has_value());
  REQUIRE(frozen.has_value());
  CHECK(*frozen == doctest::Approx(*full).epsilon(1e-12));
}
