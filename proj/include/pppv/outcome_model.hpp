#pragma once

#include "pppv/data.hpp"

#include <utility>

namespace pppv {

/// Separate OLS fits on treated and control units, intercept first.
struct FittedOutcome {
  Vector beta1;
  Vector beta0;
  Vector mu1_hat;   // every unit, treated-arm coefficients
  Vector mu0_hat;   // every unit, control-arm coefficients
  Vector residuals; // y_i - mu_{z_i}(x_i)
  Columns covariate_subset;
};

/// Throws singular_design naming the arm when either per-arm design is rank
/// deficient or has no more units than parameters.
FittedOutcome fit_outcome_models(const ObservedSample& sample, const Columns& covariate_subset);

/// Same fit from a prebuilt [1, x_subset] design and assignment.
FittedOutcome fit_outcome_models(const Vector& z, const Vector& y, const Matrix& design,
                                 Columns covariate_subset = {});

/// Predictions under each arm for rows of `x_subset` (already restricted to
/// the fit's covariate subset, no intercept).
std::pair<Vector, Vector> predict_means(const FittedOutcome& fit, const Matrix& x_subset);

}  // namespace pppv
