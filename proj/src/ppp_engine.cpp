#include "pppv/ppp_engine.hpp"

#include "pppv/error.hpp"
#include "pppv/rng.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace pppv {

namespace {

constexpr double kTieTolerance = 1e-10;
/// Share of undefined synthetic statistics that triggers a warning.
constexpr double kDegenerateWarning = 0.2;

bool is_model_failure(ErrorKind kind) {
  return kind == ErrorKind::separation || kind == ErrorKind::singular_design ||
         kind == ErrorKind::degenerate_variance || kind == ErrorKind::unstable_bootstrap;
}

void attach_degenerate_warning(PValueReport& report, long total) {
  if (total > 0 && static_cast<double>(report.n_degenerate) > kDegenerateWarning * total) {
    report.warnings.push_back("unreliable: " + std::to_string(report.n_degenerate) + " of " +
                              std::to_string(total) + " synthetic statistics undefined");
  }
}

double smoothed(long extreme, long valid) {
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + valid);
}

}  // namespace

StatisticSpec default_spec(const ObservedSample& sample, Estimator estimator, bool studentized) {
  StatisticSpec spec;
  spec.estimator = estimator;
  spec.studentized = studentized;
  spec.ps_subset = all_columns(sample.d());
  spec.outcome_subset = all_columns(sample.d());
  return spec;
}

std::string_view to_string(PMethod m) {
  switch (m) {
    case PMethod::ppp_a: return "ppp_a";
    case PMethod::ppp_b: return "ppp_b";
    case PMethod::frt: return "frt";
    case PMethod::normal: return "normal";
  }
  return "?";
}

std::string report_csv_header() {
  return "method,estimator,studentized,p_value,t_observed,R,S,n_degenerate,seed";
}

std::string to_csv_row(const PValueReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << to_string(r.method) << ',' << to_string(r.estimator) << ','
     << (r.studentized ? 1 : 0) << ',' << r.p_value << ',' << r.t_observed << ',' << r.R << ','
     << r.S << ',' << r.n_degenerate << ',' << r.seed;
  return os.str();
}

StatisticEvaluator::StatisticEvaluator(const ObservedSample& sample, StatisticSpec spec)
    : sample_(sample), spec_(std::move(spec)) {
  ps_x_ = select_columns(sample_.x, spec_.ps_subset);
  ps_design_ = with_intercept(ps_x_);
  outcome_design_ = with_intercept(select_columns(sample_.x, spec_.outcome_subset));
  require_full_rank(ps_design_, "propensity model");
  warm_theta_ = Vector::Zero(ps_design_.cols());
  try {
    const auto fit = fit_logistic(sample_.z, ps_design_, nullptr, false);
    if (fit.converged) warm_theta_ = fit.theta;
  } catch (const Error& e) {
    if (!is_model_failure(e.kind())) throw;
  }
  if (spec_.freeze_outcome && spec_.estimator != Estimator::ipw) {
    frozen_outcome_ = fit_outcome_models(sample_.z, sample_.y, outcome_design_,
                                         spec_.outcome_subset);
  }
  zero_scale_ = std::max(1.0, sample_.y.cwiseAbs().maxCoeff());
}

std::optional<double> StatisticEvaluator::operator()(const Vector& z) const {
  if (z.size() != sample_.n()) {
    throw Error(ErrorKind::dimension, "statistic: assignment length mismatch");
  }
  const Index treated = static_cast<Index>((z.array() == 1.0).count());
  if (treated == 0 || treated == z.size()) return std::nullopt;
  try {
    return evaluate(z);
  } catch (const Error& e) {
    if (is_model_failure(e.kind())) return std::nullopt;
    throw;
  }
}

std::optional<double> StatisticEvaluator::evaluate(const Vector& z) const {
  const bool needs_ps = spec_.estimator != Estimator::reg || spec_.studentized;
  const bool needs_outcome = spec_.estimator != Estimator::ipw;

  Vector e_hat;
  if (needs_ps) {
    auto ps = fit_logistic(z, ps_design_, &warm_theta_, false);
    if (!ps.converged) return std::nullopt;
    e_hat = std::move(ps.e_hat);
  }

  std::optional<FittedOutcome> outcome;
  if (needs_outcome) {
    if (frozen_outcome_) {
      outcome = *frozen_outcome_;
      outcome->residuals = sample_.y - (z.array() * outcome->mu1_hat.array() +
                                        (1.0 - z.array()) * outcome->mu0_hat.array())
                                           .matrix();
    } else {
      outcome = fit_outcome_models(z, sample_.y, outcome_design_);
    }
  }
  const FittedOutcome* fit = outcome ? &*outcome : nullptr;

  const double tau = point_estimate(z, sample_.y, e_hat, fit, spec_.estimator);
  if (!spec_.studentized) {
    const double t = std::abs(tau);
    return t <= 1e-12 * zero_scale_ ? 0.0 : t;
  }
  double se = 0.0;
  if (spec_.se_method == SeMethod::bootstrap) {
    const auto boot = bootstrap_se(sample_.with_assignment(z), spec_.estimator, spec_.ps_subset,
                                   spec_.outcome_subset, spec_.bootstrap_B, spec_.bootstrap_seed);
    if (boot.degenerate) return std::nullopt;
    se = boot.se;
  } else {
    se = sandwich_se(z, sample_.y, e_hat, fit, spec_.estimator);
  }
  return studentize(tau, se);
}

std::optional<double> compute_statistic(const Vector& z, const ObservedSample& sample,
                                        const StatisticSpec& spec) {
  return StatisticEvaluator(sample, spec)(z);
}

bool at_least_as_extreme(double t, double t_observed) {
  return t >= t_observed - kTieTolerance * std::abs(t_observed);
}

namespace {

double observed_statistic(const StatisticEvaluator& evaluator, const ObservedSample& sample) {
  const auto t = evaluator(sample.z);
  if (!t) {
    throw Error(ErrorKind::undefined_statistic,
                "statistic is undefined on the observed assignment (separation, singular "
                "design or zero standard error)");
  }
  return *t;
}

struct Tally {
  long extreme = 0;
  long valid = 0;
  long degenerate = 0;
};

Tally tally(const std::vector<std::optional<double>>& stats, double t_observed) {
  Tally t;
  for (const auto& s : stats) {
    if (!s) {
      ++t.degenerate;
    } else {
      ++t.valid;
      t.extreme += at_least_as_extreme(*s, t_observed) ? 1 : 0;
    }
  }
  return t;
}

}  // namespace

PValueReport ppp_algorithm_a(const ObservedSample& sample, const StatisticSpec& spec, int R,
                             int burn_in, std::uint64_t seed, int threads) {
  if (R < 1) throw Error(ErrorKind::config, "ppp_algorithm_a: R must be positive");
  const StatisticEvaluator evaluator(sample, spec);
  const double t_observed = observed_statistic(evaluator, sample);

  SamplerOptions options;
  options.burn_in = burn_in;
  options.n_draws = R;
  options.seed = derive_seed(seed, 1);
  const auto posterior = sample_posterior(sample, spec.ps_subset, options);

  std::vector<std::optional<double>> stats(static_cast<std::size_t>(R));
  parallel_for(stats.size(), threads, [&](std::size_t r) {
    Rng rng = make_rng(seed, 2, r);
    const Vector theta = posterior.draws.row(static_cast<Index>(r)).transpose();
    const Vector z = draw_assignments(predict_propensity(theta, evaluator.ps_covariates()), rng);
    stats[r] = evaluator(z);
  });

  const auto t = tally(stats, t_observed);
  PValueReport report;
  report.method = PMethod::ppp_a;
  report.estimator = spec.estimator;
  report.studentized = spec.studentized;
  report.t_observed = t_observed;
  report.R = R;
  report.n_degenerate = static_cast<int>(t.degenerate);
  report.seed = seed;
  report.p_value = smoothed(t.extreme, t.valid);
  attach_degenerate_warning(report, R);
  return report;
}

PValueReport ppp_algorithm_b(const ObservedSample& sample, const StatisticSpec& spec,
                             const PosteriorDraws& theta_draws, int S, std::uint64_t seed,
                             int threads) {
  const auto n_theta = theta_draws.draws.rows();
  if (n_theta < 1) throw Error(ErrorKind::config, "ppp_algorithm_b: no posterior draws");
  if (S < 1) throw Error(ErrorKind::config, "ppp_algorithm_b: S must be positive");
  const StatisticEvaluator evaluator(sample, spec);
  if (theta_draws.draws.cols() != evaluator.ps_covariates().cols() + 1) {
    throw Error(ErrorKind::dimension, "ppp_algorithm_b: draws do not match the propensity model");
  }
  const double t_observed = observed_statistic(evaluator, sample);

  std::vector<double> p_theta(static_cast<std::size_t>(n_theta));
  std::vector<long> degenerate(static_cast<std::size_t>(n_theta));
  parallel_for(p_theta.size(), threads, [&](std::size_t k) {
    const Vector theta = theta_draws.draws.row(static_cast<Index>(k)).transpose();
    const Vector probs = predict_propensity(theta, evaluator.ps_covariates());
    std::vector<std::optional<double>> stats(static_cast<std::size_t>(S));
    for (std::size_t s = 0; s < stats.size(); ++s) {
      Rng rng = make_rng(seed, 3, k, s);
      stats[s] = evaluator(draw_assignments(probs, rng));
    }
    const auto t = tally(stats, t_observed);
    p_theta[k] = smoothed(t.extreme, t.valid);
    degenerate[k] = t.degenerate;
  });

  PValueReport report;
  report.method = PMethod::ppp_b;
  report.estimator = spec.estimator;
  report.studentized = spec.studentized;
  report.t_observed = t_observed;
  report.R = static_cast<int>(n_theta);
  report.S = S;
  report.seed = seed;
  double total = 0.0;
  long n_degenerate = 0;
  for (std::size_t k = 0; k < p_theta.size(); ++k) {
    total += p_theta[k];
    n_degenerate += degenerate[k];
  }
  report.p_value = total / static_cast<double>(n_theta);
  report.n_degenerate = static_cast<int>(n_degenerate);
  attach_degenerate_warning(report, static_cast<long>(n_theta) * S);
  return report;
}

PValueReport ppp_algorithm_b(const ObservedSample& sample, const StatisticSpec& spec,
                             int n_theta, int burn_in, int S, std::uint64_t seed, int threads) {
  SamplerOptions options;
  options.burn_in = burn_in;
  options.n_draws = n_theta;
  options.seed = derive_seed(seed, 1);
  const auto posterior = sample_posterior(sample, spec.ps_subset, options);
  return ppp_algorithm_b(sample, spec, posterior, S, seed, threads);
}

Design parse_design(std::string_view text) {
  const auto colon = text.find(':');
  const auto kind = text.substr(0, colon);
  const auto rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  const auto eq = rest.find('=');
  const auto key = rest.substr(0, eq);
  const auto value = eq == std::string_view::npos ? std::string_view{} : rest.substr(eq + 1);
  if (kind == "complete" && key == "m") {
    long m = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), m);
    if (ec == std::errc() && ptr == value.data() + value.size()) {
      return CompleteRandomization{static_cast<Index>(m)};
    }
  } else if (kind == "bernoulli" && key == "p") {
    double p = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
    if (ec == std::errc() && ptr == value.data() + value.size()) {
      return BernoulliDesign{Vector::Constant(1, p)};
    }
  }
  throw Error(ErrorKind::design, "cannot parse design '" + std::string(text) +
                                     "' (expected complete:m=<int> or bernoulli:p=<real>)");
}

std::string describe(const Design& design) {
  if (const auto* c = std::get_if<CompleteRandomization>(&design)) {
    return "complete:m=" + std::to_string(c->m);
  }
  const auto& b = std::get<BernoulliDesign>(design);
  if (b.probabilities.size() == 1) {
    std::ostringstream os;
    os << std::setprecision(17) << "bernoulli:p=" << b.probabilities(0);
    return os.str();
  }
  return "bernoulli:known-probabilities";
}

PValueReport frt_pvalue(const ObservedSample& sample, const StatisticSpec& spec,
                        const Design& design, int S, std::uint64_t seed, int threads) {
  if (S < 1) throw Error(ErrorKind::config, "frt_pvalue: S must be positive");
  const Index n = sample.n();
  Vector probabilities;
  Index m = 0;
  if (const auto* c = std::get_if<CompleteRandomization>(&design)) {
    m = c->m;
    if (m <= 0 || m >= n) {
      throw Error(ErrorKind::design, "complete randomization needs 0 < m < n (m=" +
                                         std::to_string(m) + ", n=" + std::to_string(n) + ")");
    }
  } else {
    const auto& b = std::get<BernoulliDesign>(design);
    if (b.probabilities.size() == 1) {
      probabilities = Vector::Constant(n, b.probabilities(0));
    } else if (b.probabilities.size() == n) {
      probabilities = b.probabilities;
    } else {
      throw Error(ErrorKind::design, "bernoulli design: need 1 or n probabilities");
    }
    if ((probabilities.array() <= 0.0).any() || (probabilities.array() >= 1.0).any()) {
      throw Error(ErrorKind::design, "bernoulli design: probabilities must lie in (0, 1)");
    }
  }

  const StatisticEvaluator evaluator(sample, spec);
  const double t_observed = observed_statistic(evaluator, sample);

  std::vector<std::optional<double>> stats(static_cast<std::size_t>(S));
  parallel_for(stats.size(), threads, [&](std::size_t s) {
    Rng rng = make_rng(seed, 4, s);
    Vector z;
    if (probabilities.size() > 0) {
      z = draw_assignments(probabilities, rng);
    } else {
      // Partial Fisher-Yates: the first m slots of a uniform permutation.
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      z = Vector::Zero(n);
      for (Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(pick(rng))]);
        z(order[static_cast<std::size_t>(i)]) = 1.0;
      }
    }
    stats[s] = evaluator(z);
  });

  const auto t = tally(stats, t_observed);
  PValueReport report;
  report.method = PMethod::frt;
  report.estimator = spec.estimator;
  report.studentized = spec.studentized;
  report.t_observed = t_observed;
  report.S = S;
  report.n_degenerate = static_cast<int>(t.degenerate);
  report.seed = seed;
  report.p_value = smoothed(t.extreme, t.valid);
  attach_degenerate_warning(report, S);
  return report;
}

double normal_two_sided(double t) { return std::erfc(std::abs(t) / std::sqrt(2.0)); }

PValueReport normal_pvalue(const ObservedSample& sample, const StatisticSpec& spec,
                           int threads) {
  if (!spec.studentized) {
    throw Error(ErrorKind::config, "normal_pvalue requires a studentized statistic");
  }
  const auto ps = fit_logistic(sample, spec.ps_subset);
  std::optional<FittedOutcome> outcome;
  if (spec.estimator != Estimator::ipw) outcome = fit_outcome_models(sample, spec.outcome_subset);
  const FittedOutcome* fit = outcome ? &*outcome : nullptr;
  const double tau = point_estimate(sample.z, sample.y, ps.e_hat, fit, spec.estimator);
  double se = 0.0;
  if (spec.se_method == SeMethod::bootstrap) {
    const auto boot = bootstrap_se(sample, spec.estimator, spec.ps_subset, spec.outcome_subset,
                                   spec.bootstrap_B, spec.bootstrap_seed, threads);
    if (boot.degenerate) {
      throw Error(ErrorKind::degenerate_variance, "bootstrap standard error is zero");
    }
    se = boot.se;
  } else {
    se = sandwich_se(sample.z, sample.y, ps.e_hat, fit, spec.estimator);
  }

  PValueReport report;
  report.method = PMethod::normal;
  report.estimator = spec.estimator;
  report.studentized = true;
  report.t_observed = studentize(tau, se);
  report.p_value = normal_two_sided(report.t_observed);
  report.seed = spec.bootstrap_seed;
  return report;
}

}  // namespace pppv
