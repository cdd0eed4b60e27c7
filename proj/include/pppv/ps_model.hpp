#pragma once

#include "pppv/data.hpp"
#include "pppv/rng.hpp"

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pppv {

inline constexpr double kProbabilityClip = 1e-12;
inline constexpr int kMaxIrlsIterations = 100;
/// |linear predictor| beyond which a stalled IRLS is declared separated.
inline constexpr double kSeparationEta = 30.0;

struct FittedPropensity {
  Vector theta;  // intercept first
  Vector e_hat;
  bool converged = false;
  int iterations = 0;
};

struct PosteriorDraws {
  Matrix draws;  // one row per retained draw
  int burn_in = 0;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  double proposal_scale = 0.0;  // final c after burn-in adaptation
  std::vector<std::string> names;
};

struct LogPosterior {
  double value = 0.0;
  bool saturated = false;  // some probability rounds to exactly 0 or 1
};

/// [1, x] design with the intercept in column 0.
Matrix with_intercept(const Matrix& x);

inline double logistic(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

/// Maximum-likelihood logistic fit by IRLS. `design` already contains the
/// intercept column. `start` warm-starts the iteration.
///
/// Throws singular_design if the design is rank deficient and separation if
/// the likelihood has no finite maximizer. Returns converged=false when the
/// iteration cap is hit without either diagnosis. Callers that reuse one
/// design for many assignments may skip the rank check after doing it once.
FittedPropensity fit_logistic(const Vector& z, const Matrix& design,
                              const Vector* start = nullptr, bool check_rank = true);
/// Throws singular_design unless `design` has full column rank.
void require_full_rank(const Matrix& design, const std::string& what);
FittedPropensity fit_logistic(const ObservedSample& sample);
FittedPropensity fit_logistic(const ObservedSample& sample, const Columns& cols);

/// Bernoulli log-likelihood; under the flat prior this is the log-posterior
/// up to a constant.
LogPosterior log_posterior(const Vector& theta, const Vector& z, const Matrix& design);
LogPosterior log_posterior(const Vector& theta, const ObservedSample& sample);

struct SamplerOptions {
  int burn_in = 1000;
  int n_draws = 2000;
  std::uint64_t seed = 0;
  /// Burn-in acceptance window the step scale is adapted into.
  double min_acceptance = 0.15;
  double max_acceptance = 0.5;
};

/// Random-walk Metropolis on the flat-prior logistic posterior. Proposal
/// covariance is c * H^-1 with H the negative Hessian at the MLE and
/// c = 2.38^2 / p initially; c is tuned during burn-in, then frozen.
PosteriorDraws sample_posterior(const Vector& z, const Matrix& design,
                                const SamplerOptions& options);
PosteriorDraws sample_posterior(const ObservedSample& sample, int burn_in, int n_draws,
                                std::uint64_t seed);
PosteriorDraws sample_posterior(const ObservedSample& sample, const Columns& cols,
                                const SamplerOptions& options);

/// logistic(theta_0 + x_i' theta_1:) clipped to [1e-12, 1 - 1e-12]. `x` is
/// the raw covariate matrix without intercept.
Vector predict_propensity(const Vector& theta, const Matrix& x);

/// Independent Bernoulli(p_i) draws.
Vector draw_assignments(const Vector& probabilities, Rng& rng);

void write_draws_csv(const PosteriorDraws& draws, std::ostream& out);

}  // namespace pppv
