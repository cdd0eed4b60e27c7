#pragma once

#include "pppv/data.hpp"
#include "pppv/outcome_model.hpp"

#include <optional>
#include <string_view>

namespace pppv {

enum class Estimator { ipw, reg, dr };
enum class SeMethod { sandwich, bootstrap, none };

std::string_view to_string(Estimator e);
std::string_view to_string(SeMethod m);
Estimator parse_estimator(std::string_view s);
SeMethod parse_se_method(std::string_view s);

struct EffectEstimate {
  Estimator method = Estimator::dr;
  double tau_hat = 0.0;
  std::optional<double> se;
  SeMethod se_method = SeMethod::none;
  std::optional<double> t_abs;
};

/// Hajek (normalized) inverse-probability-weighted difference of arm means.
double tau_ipw_hajek(const Vector& z, const Vector& y, const Vector& e_hat);
double tau_ipw_hajek(const ObservedSample& sample, const Vector& e_hat);

/// Mean of mu1_hat - mu0_hat over all units.
double tau_reg(const FittedOutcome& fit);

/// Regression estimate plus the Horvitz-Thompson weighted residual
/// correction.
double tau_dr(const Vector& z, const Vector& e_hat, const FittedOutcome& fit);
double tau_dr(const ObservedSample& sample, const Vector& e_hat, const FittedOutcome& fit);

/// Plug-in influence values phi_i, one per unit. They sum to zero for dr and
/// ipw; `fit` is ignored for ipw.
///
///   dr/reg: phi_i = mu1_i - mu0_i + z_i r_i / e_i - (1 - z_i) r_i / (1 - e_i) - tau_dr
///   ipw:    phi_i = z_i (y_i - m1) / (e_i w1) - (1 - z_i)(y_i - m0) / ((1 - e_i) w0)
///
/// where m1, m0 are the Hajek arm means and w1, w0 the average arm weights.
Vector influence_values(const Vector& z, const Vector& y, const Vector& e_hat,
                        const FittedOutcome* fit, Estimator method);

/// sqrt(sum phi_i^2) / n. Throws degenerate_variance if every phi_i is zero.
double sandwich_se(const Vector& z, const Vector& y, const Vector& e_hat,
                   const FittedOutcome* fit, Estimator method);
double sandwich_se(const ObservedSample& sample, const Vector& e_hat, const FittedOutcome& fit,
                   Estimator method);

/// |tau_hat| / se; throws unless se > 0.
double studentize(double tau_hat, double se);

/// Point estimate for `method` from already-fitted nuisances.
double point_estimate(const Vector& z, const Vector& y, const Vector& e_hat,
                      const FittedOutcome* fit, Estimator method);

/// Fits both nuisance models on the given column subsets and returns the
/// estimate with its sandwich standard error.
EffectEstimate estimate_effect(const ObservedSample& sample, Estimator method,
                               const Columns& ps_subset, const Columns& outcome_subset,
                               bool with_se = true);

}  // namespace pppv
