#pragma once

#include "pppv/data.hpp"
#include "pppv/ppp_engine.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pppv {

enum class DgpKind { regular, extreme };
std::string_view to_string(DgpKind kind);
DgpKind parse_dgp(std::string_view s);

struct DgpConfig {
  DgpKind kind = DgpKind::regular;
  int n = 1000;
  double tau_shift = 0.0;  // mu_1 - mu_0
  bool flip_treatment = false;
  /// Give Y(1) the beta_1 slopes and Y(0) the beta_0 slopes. Off reproduces
  /// the published labeling, where Y(0) uses beta_1.
  bool swap_betas = false;
  std::uint64_t seed = 0;
};

/// E(X) for the regular design: (1/2, 23/20, 9/10, 509/120).
inline constexpr std::array<double, 4> kRegularCovariateMean = {0.5, 1.15, 0.9, 509.0 / 120.0};

/// Regular propensity design. Four covariates built from Bernoulli, uniform,
/// exponential and chi-square generators; logistic propensity without
/// intercept, coefficients (-1, 0.5, -0.25, -0.1); control noise sd 5,
/// treated noise sd 1.
SimSample gen_regular(const DgpConfig& config);

/// Extreme propensity design. X = exp(W) with W bivariate standard normal;
/// propensity logistic(-1 + X1 - X2).
SimSample gen_extreme(const DgpConfig& config);

SimSample generate(const DgpConfig& config);

/// Analysis view of a simulated sample: covariates [X | W], labelled
/// x1..xk, w1..wk, so scenario column selections can address either.
ObservedSample analysis_sample(const SimSample& sim);

enum class ScenarioId { i, ii, iii, iv };
std::string_view to_string(ScenarioId id);
ScenarioId parse_scenario(std::string_view s);

struct ScenarioSpec {
  ScenarioId id = ScenarioId::i;
  Columns ps_subset;       // indices into analysis_sample(...).x
  Columns outcome_subset;
};

/// (i) both models on X; (ii) outcome on the misspecified W subset;
/// (iii) propensity on the W subset; (iv) both on W. The W subset is
/// {W2, W3} for the regular design and {W1, W2} for the extreme one.
ScenarioSpec apply_scenario(DgpKind kind, ScenarioId id);
ScenarioSpec apply_scenario(const SimSample& sim, ScenarioId id);

/// One p-value variant evaluated per replication. Column subsets in `spec`
/// are overwritten by the scenario.
struct MethodVariant {
  std::string label;
  PMethod method = PMethod::ppp_a;
  StatisticSpec spec;
};

/// Parses "ppp-dr-stud", "ppp-dr", "pppb-dr-stud", "normal-dr",
/// "normal-dr-boot", "ppp-dr-stud-boot", with estimator ipw|reg|dr.
MethodVariant parse_method(std::string_view token);

struct StudyConfig {
  DgpConfig dgp;
  ScenarioId scenario = ScenarioId::i;
  std::vector<MethodVariant> methods;
  int replications = 300;
  int R = 300;        // posterior draws per PPP (outer draws for algorithm B)
  int burn_in = 300;
  int S = 100;        // inner draws for algorithm B
  int bootstrap_B = kDefaultBootstrapB;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Reads key=value lines ('#' comments). Keys: dgp, n, tau_shift, flip,
/// swap_betas, scenario, methods, reps, draws, burnin, inner_draws,
/// bootstrap, seed, threads.
StudyConfig parse_study_config(std::istream& in);
std::string to_config_text(const StudyConfig& config);

struct StudyResult {
  std::vector<std::string> labels;
  /// Successful replications only, one row each; columns follow `labels`.
  Matrix p_values;
  Matrix t_observed;
  std::vector<int> replication_index;
  int n_failed = 0;
  int replications = 0;
};

/// Generates `replications` samples and computes every variant's p-value on
/// each. Replication r draws from a stream derived from (seed, r), so the
/// result is the same for any thread count. Replications whose observed
/// data cannot be analysed (separation, singular fit) are dropped and
/// counted; more than 10% dropped throws unreliable_study.
StudyResult run_study(const StudyConfig& config);

inline constexpr std::array<double, 3> kAlphaLevels = {0.01, 0.05, 0.1};
inline constexpr int kHistogramBins = 20;
inline constexpr double kDensityCap = 2.0;

struct VariantSummary {
  std::string label;
  int count = 0;
  std::array<double, 3> rejection{};
  std::array<double, 3> rejection_se{};
  double ks = 0.0;
  std::array<double, kHistogramBins> density{};  // not truncated
};

std::vector<VariantSummary> summarize(const StudyResult& result);
VariantSummary summarize_pvalues(std::string label, const std::vector<double>& p_values);

/// Kolmogorov-Smirnov distance between the empirical CDF and Uniform(0,1).
double ks_uniform(std::vector<double> p_values);

void write_pvalues_csv(const StudyResult& result, std::ostream& out);
/// Reads back the long-format p-value CSV written by write_pvalues_csv.
StudyResult read_pvalues_csv(std::istream& in);
void write_summary_csv(const std::vector<VariantSummary>& summary, std::ostream& out);
/// Histogram with bars capped at density 2 and a dashed line at the cap.
std::string histogram_svg(const VariantSummary& summary);

/// Writes pvalues.csv, summary.csv and one SVG per variant into `dir`.
void write_study_outputs(const StudyResult& result, const std::filesystem::path& dir);

}  // namespace pppv
