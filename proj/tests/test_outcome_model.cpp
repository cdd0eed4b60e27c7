#include "oracles.hpp"
#include "pppv/error.hpp"
#include "pppv/outcome_model.hpp"

#include <doctest.h>

#include <random>

using namespace pppv;

namespace {

ObservedSample random_sample(Index n, Index d, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  Vector y(n);
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    z(i) = i % 3 == 0 ? 1.0 : 0.0;
    for (Index j = 0; j < d; ++j) x(i, j) = normal(rng);
    y(i) = 0.5 + x.row(i).sum() + noise * normal(rng);
  }
  return make_sample(z, y, x);
}

}  // namespace

TEST_CASE("exactly linear outcomes are reproduced") {
  const Index n = 40;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  Vector y(n);
  Matrix x(n, 2);
  for (Index i = 0; i < n; ++i) {
    z(i) = i % 2;
    x(i, 0) = normal(rng);
    x(i, 1) = normal(rng);
    y(i) = z(i) == 1.0 ? 2.0 + 3.0 * x(i, 0) - x(i, 1) : -1.0 + 0.5 * x(i, 0) + 4.0 * x(i, 1);
  }
  const auto s = make_sample(z, y, x);
  const auto fit = fit_outcome_models(s, {0, 1});
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-10);
  for (Index i = 0; i < n; ++i) {
    CHECK(std::abs((z(i) == 1.0 ? fit.mu1_hat(i) : fit.mu0_hat(i)) - y(i)) < 1e-10);
    CHECK(std::abs(fit.mu1_hat(i) - (2.0 + 3.0 * x(i, 0) - x(i, 1))) < 1e-10);
    CHECK(std::abs(fit.mu0_hat(i) - (-1.0 + 0.5 * x(i, 0) + 4.0 * x(i, 1))) < 1e-10);
  }
}

TEST_CASE("intercept-only subset gives arm means") {
  const auto s = random_sample(30, 2, 4, 1.0);
  const auto fit = fit_outcome_models(s, {});
  double m1 = 0.0;
  double m0 = 0.0;
  double n1 = 0.0;
  for (Index i = 0; i < s.n(); ++i) {
    if (s.z(i) == 1.0) {
      m1 += s.y(i);
      n1 += 1.0;
    } else {
      m0 += s.y(i);
    }
  }
  m1 /= n1;
  m0 /= static_cast<double>(s.n()) - n1;
  CHECK(fit.mu1_hat.isApproxToConstant(m1, 1e-12));
  CHECK(fit.mu0_hat.isApproxToConstant(m0, 1e-12));
}

TEST_CASE("coefficients match explicit normal equations") {
  const auto s = random_sample(30, 2, 17, 0.7);
  const auto fit = fit_outcome_models(s, {0, 1});
  for (const double arm : {1.0, 0.0}) {
    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xty = Eigen::Vector3d::Zero();
    for (Index i = 0; i < s.n(); ++i) {
      if (s.z(i) != arm) continue;
      const Eigen::Vector3d row(1.0, s.x(i, 0), s.x(i, 1));
      xtx += row * row.transpose();
      xty += row * s.y(i);
    }
    const Eigen::Vector3d beta = oracle::inverse3(xtx) * xty;
    const Vector& fitted = arm == 1.0 ? fit.beta1 : fit.beta0;
    for (int j = 0; j < 3; ++j) CHECK(std::abs(fitted(j) - beta(j)) < 1e-10);
  }
}

TEST_CASE("residuals are orthogonal to the design within each arm") {
  const auto s = random_sample(500, 3, 23, 2.0);
  const auto fit = fit_outcome_models(s, {0, 1, 2});
  for (const double arm : {1.0, 0.0}) {
    Vector cross = Vector::Zero(4);
    for (Index i = 0; i < s.n(); ++i) {
      if (s.z(i) != arm) continue;
      cross(0) += fit.residuals(i);
      for (Index j = 0; j < 3; ++j) cross(j + 1) += fit.residuals(i) * s.x(i, j);
    }
    CHECK(cross.cwiseAbs().maxCoeff() <= 1e-6 * 500);
  }
}

TEST_CASE("shift and scale of the outcome") {
  const auto s = random_sample(80, 2, 5, 1.0);
  const auto base = fit_outcome_models(s, {0, 1});
  auto shifted = s;
  shifted.y.array() += 7.5;
  const auto fs = fit_outcome_models(shifted, {0, 1});
  CHECK((fs.mu1_hat.array() - base.mu1_hat.array() - 7.5).abs().maxCoeff() < 1e-10);
  CHECK((fs.mu0_hat.array() - base.mu0_hat.array() - 7.5).abs().maxCoeff() < 1e-10);
  CHECK((fs.residuals - base.residuals).cwiseAbs().maxCoeff() < 1e-10);

  auto scaled = s;
  scaled.y *= -3.0;
  const auto fc = fit_outcome_models(scaled, {0, 1});
  CHECK((fc.mu1_hat + 3.0 * base.mu1_hat).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fc.mu0_hat + 3.0 * base.mu0_hat).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fc.residuals + 3.0 * base.residuals).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("singular arm designs name the arm") {
  auto s = random_sample(30, 2, 2, 1.0);
  for (Index i = 0; i < s.n(); ++i) {
    if (s.z(i) == 0.0) s.x(i, 1) = 2.0 * s.x(i, 0);
  }
  try {
    fit_outcome_models(s, {0, 1});
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_design);
    CHECK(std::string(e.what()).find("control") != std::string::npos);
  }

  Vector z = Vector::Zero(10);
  z.head(3).setOnes();
  Matrix x(10, 3);
  x.setRandom();
  const auto tiny = make_sample(z, Vector::Zero(10), x);
  try {
    fit_outcome_models(tiny, {0, 1, 2});
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_design);
    CHECK(std::string(e.what()).find("treated") != std::string::npos);
  }
}

TEST_CASE("predictions on new rows") {
  const auto s = random_sample(60, 2, 8, 1.0);
  const auto fit = fit_outcome_models(s, {0, 1});

  const auto [z1, z0] = predict_means(fit, Matrix::Zero(1, 2));
  CHECK(z1(0) == fit.beta1(0));
  CHECK(z0(0) == fit.beta0(0));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  Matrix x(50, 2);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  const auto [m1, m0] = predict_means(fit, x);
  for (Index i = 0; i < 50; ++i) {
    const double a = fit.beta1(0) + fit.beta1(1) * x(i, 0) + fit.beta1(2) * x(i, 1);
    const double b = fit.beta0(0) + fit.beta0(1) * x(i, 0) + fit.beta0(2) * x(i, 1);
    CHECK(std::abs(m1(i) - a) <= 1e-14 * std::max(1.0, std::abs(a)));
    CHECK(std::abs(m0(i) - b) <= 1e-14 * std::max(1.0, std::abs(b)));
  }

  Matrix dup(2, 2);
  dup.row(0) = x.row(4);
  dup.row(1) = x.row(4);
  const auto [d1, d0] = predict_means(fit, dup);
  CHECK(d1(0) == d1(1));
  CHECK(d0(0) == d0(1));

  CHECK_THROWS_AS(predict_means(fit, Matrix::Zero(3, 3)), Error);
}

TEST_CASE("subset fit records its columns and uses only them") {
  const auto s = random_sample(90, 3, 12, 1.0);
  const auto fit = fit_outcome_models(s, {2});
  CHECK(fit.covariate_subset == Columns{2});
  CHECK(fit.beta1.size() == 2);
  const auto [m1, m0] = predict_means(fit, select_columns(s.x, {2}));
  CHECK((m1 - fit.mu1_hat).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((m0 - fit.mu0_hat).cwiseAbs().maxCoeff() < 1e-13);
}
