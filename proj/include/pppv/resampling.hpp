#pragma once

#include "pppv/data.hpp"
#include "pppv/estimators.hpp"

#include <cstdint>
#include <vector>

namespace pppv {

inline constexpr int kDefaultBootstrapB = 2000;

struct BootstrapResult {
  double se = 0.0;
  int B = 0;
  std::vector<double> replicate_estimates;
  int n_failed = 0;
  /// Set when the replicates agree up to rounding; se is then reported as 0.
  bool degenerate = false;
};

/// Pairs bootstrap: B unit-level resamples with replacement, both nuisance
/// models refit in each. Resamples with an empty arm, separation, a singular
/// fit or a non-converged propensity fit are discarded and counted, never
/// redrawn. Replicate b uses its own counter-derived stream, so the result
/// does not depend on `threads`.
///
/// Throws unstable_bootstrap when more than half the resamples fail.
BootstrapResult bootstrap_se(const ObservedSample& sample, Estimator method,
                             const Columns& ps_subset, const Columns& outcome_subset, int B,
                             std::uint64_t seed, int threads = 1);

}  // namespace pppv
