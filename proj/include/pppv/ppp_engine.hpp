#pragma once

#include "pppv/data.hpp"
#include "pppv/estimators.hpp"
#include "pppv/outcome_model.hpp"
#include "pppv/ps_model.hpp"
#include "pppv/resampling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pppv {

/// Test statistic T(Z, X, Y): |tau_hat| or |tau_hat| / se for one estimator,
/// with the propensity and outcome models refit on the given columns for
/// every assignment.
struct StatisticSpec {
  Estimator estimator = Estimator::dr;
  bool studentized = true;
  SeMethod se_method = SeMethod::sandwich;
  Columns ps_subset;
  Columns outcome_subset;
  /// Resamples per bootstrap SE when se_method is bootstrap.
  int bootstrap_B = kDefaultBootstrapB;
  std::uint64_t bootstrap_seed = 0;
  /// Reuse the observed-data outcome fit instead of refitting per draw.
  /// Faster but not the statistic the tests are defined for.
  bool freeze_outcome = false;
};

/// Spec with every column used by both models.
StatisticSpec default_spec(const ObservedSample& sample, Estimator estimator, bool studentized);

enum class PMethod { ppp_a, ppp_b, frt, normal };
std::string_view to_string(PMethod m);

struct PValueReport {
  PMethod method = PMethod::ppp_a;
  Estimator estimator = Estimator::dr;
  bool studentized = false;
  double p_value = 1.0;
  double t_observed = 0.0;
  int R = 0;
  int S = 0;
  int n_degenerate = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

std::string report_csv_header();
std::string to_csv_row(const PValueReport& report);

/// Evaluates T for many assignments over one fixed (X, Y). Design matrices
/// are built and rank-checked once; each call refits the nuisance models
/// from a warm start at the observed-data fit.
class StatisticEvaluator {
 public:
  StatisticEvaluator(const ObservedSample& sample, StatisticSpec spec);

  /// nullopt when T is undefined under `z`: empty arm, separation, singular
  /// outcome design, non-converged fit or zero standard error.
  std::optional<double> operator()(const Vector& z) const;

  const StatisticSpec& spec() const { return spec_; }
  const Matrix& ps_covariates() const { return ps_x_; }

 private:
  std::optional<double> evaluate(const Vector& z) const;

  ObservedSample sample_;
  StatisticSpec spec_;
  Matrix ps_x_;
  Matrix ps_design_;
  Matrix outcome_design_;
  Vector warm_theta_;
  std::optional<FittedOutcome> frozen_outcome_;
  double zero_scale_ = 1.0;
};

/// One-shot T(z, X, Y).
std::optional<double> compute_statistic(const Vector& z, const ObservedSample& sample,
                                        const StatisticSpec& spec);

/// Whether `t` is at least as extreme as `t_observed`; ties count, with a
/// relative tolerance for rounding in refits.
bool at_least_as_extreme(double t, double t_observed);

/// Posterior predictive p-value by joint simulation: the r-th retained
/// posterior draw of the propensity coefficients yields one synthetic
/// assignment and one replicated statistic.
/// p = (1 + #{T_r >= T_obs}) / (1 + R - #degenerate).
PValueReport ppp_algorithm_a(const ObservedSample& sample, const StatisticSpec& spec, int R,
                             int burn_in, std::uint64_t seed, int threads = 1);

/// Posterior predictive p-value as the average over posterior draws of the
/// fixed-propensity randomization p-value, each estimated from S inner
/// assignments.
PValueReport ppp_algorithm_b(const ObservedSample& sample, const StatisticSpec& spec,
                             const PosteriorDraws& theta_draws, int S, std::uint64_t seed,
                             int threads = 1);

/// Samples `n_theta` posterior draws after `burn_in`, then runs algorithm B.
PValueReport ppp_algorithm_b(const ObservedSample& sample, const StatisticSpec& spec,
                             int n_theta, int burn_in, int S, std::uint64_t seed,
                             int threads = 1);

struct CompleteRandomization {
  Index m = 0;  // treated count
};
struct BernoulliDesign {
  Vector probabilities;  // length 1 means a common probability
};
using Design = std::variant<CompleteRandomization, BernoulliDesign>;

/// "complete:m=<int>", "bernoulli:p=<real>". Known unit-level probabilities
/// are passed as a BernoulliDesign directly.
Design parse_design(std::string_view text);
std::string describe(const Design& design);

/// Monte Carlo Fisher randomization test with S draws from a known design.
PValueReport frt_pvalue(const ObservedSample& sample, const StatisticSpec& spec,
                        const Design& design, int S, std::uint64_t seed, int threads = 1);

/// Two-sided normal-approximation p-value 2(1 - Phi(|tau|/se)).
PValueReport normal_pvalue(const ObservedSample& sample, const StatisticSpec& spec,
                           int threads = 1);

/// 2(1 - Phi(t)) for t >= 0.
double normal_two_sided(double t);

}  // namespace pppv
