#include "pppv/estimators.hpp"

#include "pppv/error.hpp"
#include "pppv/ps_model.hpp"

#include <cmath>

namespace pppv {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::ipw: return "ipw";
    case Estimator::reg: return "reg";
    case Estimator::dr: return "dr";
  }
  return "?";
}

std::string_view to_string(SeMethod m) {
  switch (m) {
    case SeMethod::sandwich: return "sandwich";
    case SeMethod::bootstrap: return "bootstrap";
    case SeMethod::none: return "none";
  }
  return "?";
}

Estimator parse_estimator(std::string_view s) {
  if (s == "ipw") return Estimator::ipw;
  if (s == "reg") return Estimator::reg;
  if (s == "dr") return Estimator::dr;
  throw Error(ErrorKind::config, "unknown estimator '" + std::string(s) + "'");
}

SeMethod parse_se_method(std::string_view s) {
  if (s == "sandwich") return SeMethod::sandwich;
  if (s == "bootstrap") return SeMethod::bootstrap;
  if (s == "none") return SeMethod::none;
  throw Error(ErrorKind::config, "unknown se method '" + std::string(s) + "'");
}

namespace {

struct HajekParts {
  double mean1 = 0.0;
  double mean0 = 0.0;
  double weight1 = 0.0;  // sum of z/e
  double weight0 = 0.0;  // sum of (1-z)/(1-e)
};

HajekParts hajek_parts(const Vector& z, const Vector& y, const Vector& e_hat) {
  if (z.size() != y.size() || z.size() != e_hat.size()) {
    throw Error(ErrorKind::dimension, "ipw: length mismatch");
  }
  HajekParts h;
  if (z.size() == 0) throw Error(ErrorKind::validation, "ipw: empty sample");
  // Weighted means are taken around a common reference so that constant
  // outcomes give exactly equal arm means.
  const double reference = y(0);
  double num1 = 0.0;
  double num0 = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    if (z(i) == 1.0) {
      const double w = 1.0 / e_hat(i);
      num1 += w * (y(i) - reference);
      h.weight1 += w;
    } else {
      const double w = 1.0 / (1.0 - e_hat(i));
      num0 += w * (y(i) - reference);
      h.weight0 += w;
    }
  }
  if (!(h.weight1 > 0.0) || !(h.weight0 > 0.0)) {
    throw Error(ErrorKind::validation, "ipw: an arm has zero total weight");
  }
  h.mean1 = reference + num1 / h.weight1;
  h.mean0 = reference + num0 / h.weight0;
  return h;
}

void check_fit(const Vector& z, const FittedOutcome* fit) {
  if (fit == nullptr) throw Error(ErrorKind::config, "outcome fit required for reg/dr");
  if (fit->residuals.size() != z.size()) {
    throw Error(ErrorKind::dimension, "outcome fit does not match sample size");
  }
}

}  // namespace

double tau_ipw_hajek(const Vector& z, const Vector& y, const Vector& e_hat) {
  const auto h = hajek_parts(z, y, e_hat);
  return h.mean1 - h.mean0;
}

double tau_ipw_hajek(const ObservedSample& sample, const Vector& e_hat) {
  return tau_ipw_hajek(sample.z, sample.y, e_hat);
}

double tau_reg(const FittedOutcome& fit) { return (fit.mu1_hat - fit.mu0_hat).mean(); }

double tau_dr(const Vector& z, const Vector& e_hat, const FittedOutcome& fit) {
  check_fit(z, &fit);
  if (e_hat.size() != z.size()) throw Error(ErrorKind::dimension, "dr: length mismatch");
  double correction = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    correction += z(i) == 1.0 ? fit.residuals(i) / e_hat(i)
                              : -fit.residuals(i) / (1.0 - e_hat(i));
  }
  return tau_reg(fit) + correction / static_cast<double>(z.size());
}

double tau_dr(const ObservedSample& sample, const Vector& e_hat, const FittedOutcome& fit) {
  return tau_dr(sample.z, e_hat, fit);
}

Vector influence_values(const Vector& z, const Vector& y, const Vector& e_hat,
                        const FittedOutcome* fit, Estimator method) {
  const Index n = z.size();
  Vector phi(n);
  if (method == Estimator::ipw) {
    const auto h = hajek_parts(z, y, e_hat);
    const double w1 = h.weight1 / static_cast<double>(n);
    const double w0 = h.weight0 / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) {
      phi(i) = z(i) == 1.0 ? (y(i) - h.mean1) / (e_hat(i) * w1)
                           : -(y(i) - h.mean0) / ((1.0 - e_hat(i)) * w0);
    }
    return phi;
  }
  check_fit(z, fit);
  for (Index i = 0; i < n; ++i) {
    const double r = fit->residuals(i);
    phi(i) = fit->mu1_hat(i) - fit->mu0_hat(i) +
             (z(i) == 1.0 ? r / e_hat(i) : -r / (1.0 - e_hat(i)));
  }
  phi.array() -= phi.mean();
  return phi;
}

double sandwich_se(const Vector& z, const Vector& y, const Vector& e_hat,
                   const FittedOutcome* fit, Estimator method) {
  const Vector phi = influence_values(z, y, e_hat, fit, method);
  const double se = phi.norm() / static_cast<double>(z.size());
  // Influence values that are zero up to rounding of a vanishing estimate.
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  if (!(se > 1e-14 * scale)) {
    throw Error(ErrorKind::degenerate_variance, "all influence values are zero");
  }
  return se;
}

double sandwich_se(const ObservedSample& sample, const Vector& e_hat, const FittedOutcome& fit,
                   Estimator method) {
  return sandwich_se(sample.z, sample.y, e_hat, &fit, method);
}

double studentize(double tau_hat, double se) {
  if (!(se > 0.0)) throw Error(ErrorKind::degenerate_variance, "studentize: se must be > 0");
  return std::abs(tau_hat) / se;
}

double point_estimate(const Vector& z, const Vector& y, const Vector& e_hat,
                      const FittedOutcome* fit, Estimator method) {
  switch (method) {
    case Estimator::ipw: return tau_ipw_hajek(z, y, e_hat);
    case Estimator::reg: check_fit(z, fit); return tau_reg(*fit);
    case Estimator::dr: return tau_dr(z, e_hat, *fit);
  }
  return 0.0;
}

EffectEstimate estimate_effect(const ObservedSample& sample, Estimator method,
                               const Columns& ps_subset, const Columns& outcome_subset,
                               bool with_se) {
  const auto ps = fit_logistic(sample, ps_subset);
  std::optional<FittedOutcome> outcome;
  if (method != Estimator::ipw) outcome = fit_outcome_models(sample, outcome_subset);
  const FittedOutcome* fit = outcome ? &*outcome : nullptr;

  EffectEstimate est;
  est.method = method;
  est.tau_hat = point_estimate(sample.z, sample.y, ps.e_hat, fit, method);
  if (with_se) {
    est.se = sandwich_se(sample.z, sample.y, ps.e_hat, fit, method);
    est.se_method = SeMethod::sandwich;
    est.t_abs = studentize(est.tau_hat, *est.se);
  }
  return est;
}

}  // namespace pppv
