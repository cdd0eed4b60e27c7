#include "pppv/resampling.hpp"

#include "pppv/error.hpp"
#include "pppv/ps_model.hpp"
#include "pppv/rng.hpp"

#include <cmath>
#include <optional>

namespace pppv {

BootstrapResult bootstrap_se(const ObservedSample& sample, Estimator method,
                             const Columns& ps_subset, const Columns& outcome_subset, int B,
                             std::uint64_t seed, int threads) {
  if (B < 2) throw Error(ErrorKind::config, "bootstrap_se: B must be at least 2");
  const Index n = sample.n();
  const Matrix ps_design = with_intercept(select_columns(sample.x, ps_subset));
  const Matrix outcome_design = with_intercept(select_columns(sample.x, outcome_subset));

  std::vector<std::optional<double>> estimates(static_cast<std::size_t>(B));
  parallel_for(estimates.size(), threads, [&](std::size_t b) {
    Rng rng = make_rng(seed, 0xb007, b);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Vector z(n);
    Vector y(n);
    Matrix ps_x(n, ps_design.cols());
    Matrix out_x(n, outcome_design.cols());
    Index treated = 0;
    for (Index i = 0; i < n; ++i) {
      const Index r = pick(rng);
      z(i) = sample.z(r);
      y(i) = sample.y(r);
      ps_x.row(i) = ps_design.row(r);
      out_x.row(i) = outcome_design.row(r);
      treated += z(i) == 1.0 ? 1 : 0;
    }
    if (treated == 0 || treated == n) return;
    try {
      const auto ps = fit_logistic(z, ps_x);
      if (!ps.converged) return;
      std::optional<FittedOutcome> outcome;
      if (method != Estimator::ipw) outcome = fit_outcome_models(z, y, out_x);
      estimates[b] = point_estimate(z, y, ps.e_hat, outcome ? &*outcome : nullptr, method);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::separation && e.kind() != ErrorKind::singular_design) throw;
    }
  });

  BootstrapResult result;
  result.B = B;
  for (const auto& e : estimates) {
    if (e) {
      result.replicate_estimates.push_back(*e);
    } else {
      ++result.n_failed;
    }
  }
  if (2 * result.n_failed > B) {
    throw Error(ErrorKind::unstable_bootstrap,
                std::to_string(result.n_failed) + " of " + std::to_string(B) +
                    " bootstrap resamples failed");
  }
  const auto m = result.replicate_estimates.size();
  if (m < 2) {
    result.degenerate = true;
    return result;
  }
  const Eigen::Map<const Vector> reps(result.replicate_estimates.data(), static_cast<Index>(m));
  const double mean = reps.mean();
  result.se = std::sqrt((reps.array() - mean).square().sum() / static_cast<double>(m - 1));
  // Constant outcomes reproduce the same estimate up to rounding.
  const double scale = std::max(1.0, sample.y.cwiseAbs().maxCoeff());
  if (!(result.se > 1e-12 * scale)) {
    result.degenerate = true;
    result.se = 0.0;
  }
  return result;
}

}  // namespace pppv
