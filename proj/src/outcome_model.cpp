#include "pppv/outcome_model.hpp"

#include "pppv/error.hpp"
#include "pppv/ps_model.hpp"

namespace pppv {

namespace {

Vector fit_arm(const Vector& z, const Vector& y, const Matrix& design, double arm,
               const char* arm_name) {
  const Index n_arm = static_cast<Index>((z.array() == arm).count());
  const Index p = design.cols();
  if (n_arm <= p) {
    throw Error(ErrorKind::singular_design, std::string(arm_name) + " arm: " +
                                                std::to_string(n_arm) + " units for " +
                                                std::to_string(p) + " parameters");
  }
  Matrix a(n_arm, p);
  Vector b(n_arm);
  Index k = 0;
  for (Index i = 0; i < z.size(); ++i) {
    if (z(i) == arm) {
      a.row(k) = design.row(i);
      b(k) = y(i);
      ++k;
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (qr.rank() < p) {
    throw Error(ErrorKind::singular_design, std::string(arm_name) + " arm: design has rank " +
                                                std::to_string(qr.rank()) + " < " +
                                                std::to_string(p));
  }
  return qr.solve(b);
}

}  // namespace

FittedOutcome fit_outcome_models(const Vector& z, const Vector& y, const Matrix& design,
                                 Columns covariate_subset) {
  if (z.size() != design.rows() || y.size() != design.rows()) {
    throw Error(ErrorKind::dimension, "fit_outcome_models: length mismatch");
  }
  FittedOutcome fit;
  fit.beta1 = fit_arm(z, y, design, 1.0, "treated");
  fit.beta0 = fit_arm(z, y, design, 0.0, "control");
  fit.mu1_hat = design * fit.beta1;
  fit.mu0_hat = design * fit.beta0;
  fit.residuals = y - (z.array() * fit.mu1_hat.array() +
                       (1.0 - z.array()) * fit.mu0_hat.array()).matrix();
  fit.covariate_subset = std::move(covariate_subset);
  return fit;
}

FittedOutcome fit_outcome_models(const ObservedSample& sample, const Columns& covariate_subset) {
  return fit_outcome_models(sample.z, sample.y,
                            with_intercept(select_columns(sample.x, covariate_subset)),
                            covariate_subset);
}

std::pair<Vector, Vector> predict_means(const FittedOutcome& fit, const Matrix& x_subset) {
  if (x_subset.cols() + 1 != fit.beta1.size()) {
    throw Error(ErrorKind::dimension, "predict_means: expected " +
                                          std::to_string(fit.beta1.size() - 1) +
                                          " columns, got " + std::to_string(x_subset.cols()));
  }
  const Matrix design = with_intercept(x_subset);
  return {design * fit.beta1, design * fit.beta0};
}

}  // namespace pppv
