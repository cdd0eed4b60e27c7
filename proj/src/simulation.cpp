#include "pppv/simulation.hpp"

#include "pppv/error.hpp"
#include "pppv/rng.hpp"

#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>

namespace pppv {

std::string_view to_string(DgpKind kind) {
  return kind == DgpKind::regular ? "regular" : "extreme";
}

DgpKind parse_dgp(std::string_view s) {
  if (s == "regular") return DgpKind::regular;
  if (s == "extreme") return DgpKind::extreme;
  throw Error(ErrorKind::config, "unknown dgp '" + std::string(s) + "'");
}

std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::i: return "i";
    case ScenarioId::ii: return "ii";
    case ScenarioId::iii: return "iii";
    case ScenarioId::iv: return "iv";
  }
  return "?";
}

ScenarioId parse_scenario(std::string_view s) {
  if (s == "i") return ScenarioId::i;
  if (s == "ii") return ScenarioId::ii;
  if (s == "iii") return ScenarioId::iii;
  if (s == "iv") return ScenarioId::iv;
  throw Error(ErrorKind::config, "unknown scenario '" + std::string(s) + "'");
}

namespace {

constexpr std::array<double, 4> kRegularTheta = {-1.0, 0.5, -0.25, -0.1};
constexpr std::array<double, 4> kRegularBeta1 = {0.1, -0.2, -0.2, -0.2};
constexpr std::array<double, 4> kRegularBeta0 = {-0.1, 0.3, 0.1, -0.2};
constexpr double kRegularBaseline = 1.0;

constexpr std::array<double, 2> kExtremeTheta = {1.0, -1.0};
constexpr double kExtremeIntercept = -1.0;
constexpr std::array<double, 2> kExtremeBeta1 = {-0.2, 0.1};
constexpr std::array<double, 2> kExtremeBeta0 = {0.2, -0.1};

constexpr double kControlNoiseSd = 5.0;
constexpr double kTreatedNoiseSd = 1.0;

void check_config(const DgpConfig& config, DgpKind expected) {
  if (config.kind != expected) throw Error(ErrorKind::config, "dgp kind mismatch");
  if (config.n < 50) throw Error(ErrorKind::config, "dgp: n must be at least 50");
}

/// Draws Z and potential outcomes given covariates and the linear predictor.
template <std::size_t K>
SimSample finish(Matrix x, Matrix w, const Vector& eta, const std::array<double, K>& mu,
                 const std::array<double, K>& beta_control,
                 const std::array<double, K>& beta_treated, double baseline,
                 const DgpConfig& config, Rng& rng) {
  const Index n = x.rows();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& b0 = config.swap_betas ? beta_treated : beta_control;
  const auto& b1 = config.swap_betas ? beta_control : beta_treated;

  SimSample sim;
  sim.propensity.resize(n);
  sim.y0.resize(n);
  sim.y1.resize(n);
  Vector z(n);
  for (Index i = 0; i < n; ++i) {
    sim.propensity(i) = logistic(eta(i));
    z(i) = uniform(rng) < sim.propensity(i) ? 1.0 : 0.0;
    double lin0 = 0.0;
    double lin1 = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      const double centered = x(i, static_cast<Index>(j)) - mu[j];
      lin0 += centered * b0[j];
      lin1 += centered * b1[j];
    }
    sim.y0(i) = baseline + lin0 + kControlNoiseSd * normal(rng);
    sim.y1(i) = baseline + config.tau_shift + lin1 + kTreatedNoiseSd * normal(rng);
  }
  sim.true_tau = config.tau_shift;
  if (config.flip_treatment) {
    // Relabel before revealing outcomes: the former control units now show
    // Y(1) and the former treated units Y(0).
    z = (1.0 - z.array()).matrix();
    sim.propensity = (1.0 - sim.propensity.array()).matrix();
  }
  const Vector y = (z.array() * sim.y1.array() + (1.0 - z.array()) * sim.y0.array()).matrix();
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < K; ++j) labels.push_back("x" + std::to_string(j + 1));
  sim.observed = ObservedSample{std::move(z), y, std::move(x), std::move(labels)};
  sim.w = std::move(w);
  return sim;
}

}  // namespace

SimSample gen_regular(const DgpConfig& config) {
  check_config(config, DgpKind::regular);
  const Index n = config.n;
  Rng rng = make_rng(config.seed, 0xd69);
  std::bernoulli_distribution w1_dist(0.5);
  std::uniform_real_distribution<double> w2_dist(0.0, 2.0);
  std::exponential_distribution<double> w3_dist(1.0);
  std::chi_squared_distribution<double> w4_dist(4.0);

  Matrix w(n, 4);
  Matrix x(n, 4);
  Vector eta(n);
  for (Index i = 0; i < n; ++i) {
    w(i, 0) = w1_dist(rng) ? 1.0 : 0.0;
    w(i, 1) = w2_dist(rng);
    w(i, 2) = w3_dist(rng);
    w(i, 3) = w4_dist(rng);
    const double x1 = w(i, 0);
    const double x2 = w(i, 1) + 0.3 * x1;
    const double x3 = w(i, 2) + 0.2 * (x1 * x2 - x2);
    const double x4 = w(i, 3) + 0.1 * (x1 + x3 + x2 * x3);
    x(i, 0) = x1;
    x(i, 1) = x2;
    x(i, 2) = x3;
    x(i, 3) = x4;
    eta(i) = 0.0;
    for (Index j = 0; j < 4; ++j) eta(i) += kRegularTheta[static_cast<std::size_t>(j)] * x(i, j);
  }
  return finish(std::move(x), std::move(w), eta, kRegularCovariateMean, kRegularBeta1,
                kRegularBeta0, kRegularBaseline, config, rng);
}

SimSample gen_extreme(const DgpConfig& config) {
  check_config(config, DgpKind::extreme);
  const Index n = config.n;
  Rng rng = make_rng(config.seed, 0xe47);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double root_e = std::exp(0.5);
  const std::array<double, 2> mu = {root_e, root_e};

  Matrix w(n, 2);
  Matrix x(n, 2);
  Vector eta(n);
  for (Index i = 0; i < n; ++i) {
    w(i, 0) = normal(rng);
    w(i, 1) = normal(rng);
    x(i, 0) = std::exp(w(i, 0));
    x(i, 1) = std::exp(w(i, 1));
    eta(i) = kExtremeIntercept + kExtremeTheta[0] * x(i, 0) + kExtremeTheta[1] * x(i, 1);
  }
  return finish(std::move(x), std::move(w), eta, mu, kExtremeBeta1, kExtremeBeta0,
                -1.0 + 0.1 * root_e, config, rng);
}

SimSample generate(const DgpConfig& config) {
  return config.kind == DgpKind::regular ? gen_regular(config) : gen_extreme(config);
}

ObservedSample analysis_sample(const SimSample& sim) {
  const auto& obs = sim.observed;
  ObservedSample out;
  out.z = obs.z;
  out.y = obs.y;
  out.x.resize(obs.n(), obs.d() + sim.w.cols());
  out.x.leftCols(obs.d()) = obs.x;
  out.x.rightCols(sim.w.cols()) = sim.w;
  out.labels = obs.labels;
  for (Index j = 0; j < sim.w.cols(); ++j) out.labels.push_back("w" + std::to_string(j + 1));
  return out;
}

ScenarioSpec apply_scenario(DgpKind kind, ScenarioId id) {
  const Index k = kind == DgpKind::regular ? 4 : 2;
  const Columns correct = all_columns(k);
  // W columns follow the k X columns in analysis_sample.
  const Columns misspecified =
      kind == DgpKind::regular ? Columns{k + 1, k + 2} : Columns{k + 0, k + 1};
  ScenarioSpec spec;
  spec.id = id;
  const bool bad_outcome = id == ScenarioId::ii || id == ScenarioId::iv;
  const bool bad_ps = id == ScenarioId::iii || id == ScenarioId::iv;
  spec.ps_subset = bad_ps ? misspecified : correct;
  spec.outcome_subset = bad_outcome ? misspecified : correct;
  return spec;
}

ScenarioSpec apply_scenario(const SimSample& sim, ScenarioId id) {
  const auto kind = sim.w.cols() == 4 ? DgpKind::regular : DgpKind::extreme;
  return apply_scenario(kind, id);
}

MethodVariant parse_method(std::string_view token) {
  MethodVariant v;
  v.label = std::string(token);
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = token.find('-', start);
    parts.push_back(token.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2) throw Error(ErrorKind::config, "bad method '" + v.label + "'");
  if (parts[0] == "ppp") {
    v.method = PMethod::ppp_a;
  } else if (parts[0] == "pppb") {
    v.method = PMethod::ppp_b;
  } else if (parts[0] == "normal") {
    v.method = PMethod::normal;
    v.spec.studentized = true;
  } else {
    throw Error(ErrorKind::config, "bad method '" + v.label + "'");
  }
  v.spec.estimator = parse_estimator(parts[1]);
  if (v.method != PMethod::normal) v.spec.studentized = false;
  for (std::size_t k = 2; k < parts.size(); ++k) {
    if (parts[k] == "stud") {
      v.spec.studentized = true;
    } else if (parts[k] == "boot") {
      v.spec.se_method = SeMethod::bootstrap;
    } else if (parts[k] == "fast") {
      v.spec.freeze_outcome = true;
    } else {
      throw Error(ErrorKind::config, "bad method modifier in '" + v.label + "'");
    }
  }
  if (v.spec.se_method == SeMethod::bootstrap && !v.spec.studentized) {
    throw Error(ErrorKind::config, "'boot' needs a studentized statistic in '" + v.label + "'");
  }
  return v;
}

namespace {

std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::config, "bad integer for " + key + ": '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::config, "bad number for " + key + ": '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw Error(ErrorKind::config, "bad flag for " + key + ": '" + value + "'");
}

}  // namespace

StudyConfig parse_study_config(std::istream& in) {
  StudyConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto text = trim_copy(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim_copy(std::string_view(text).substr(0, eq));
    const auto value = trim_copy(std::string_view(text).substr(eq + 1));
    if (key == "dgp") {
      config.dgp.kind = parse_dgp(value);
    } else if (key == "n") {
      config.dgp.n = static_cast<int>(parse_long(key, value));
    } else if (key == "tau_shift") {
      config.dgp.tau_shift = parse_double(key, value);
    } else if (key == "flip") {
      config.dgp.flip_treatment = parse_bool(key, value);
    } else if (key == "swap_betas") {
      config.dgp.swap_betas = parse_bool(key, value);
    } else if (key == "scenario") {
      config.scenario = parse_scenario(value);
    } else if (key == "methods") {
      config.methods.clear();
      std::stringstream ss(value);
      std::string token;
      while (std::getline(ss, token, ',')) config.methods.push_back(parse_method(trim_copy(token)));
    } else if (key == "reps") {
      config.replications = static_cast<int>(parse_long(key, value));
    } else if (key == "draws") {
      config.R = static_cast<int>(parse_long(key, value));
    } else if (key == "burnin") {
      config.burn_in = static_cast<int>(parse_long(key, value));
    } else if (key == "inner_draws") {
      config.S = static_cast<int>(parse_long(key, value));
    } else if (key == "bootstrap") {
      config.bootstrap_B = static_cast<int>(parse_long(key, value));
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "threads") {
      config.threads = static_cast<int>(parse_long(key, value));
    } else {
      throw Error(ErrorKind::config, "unknown key '" + key + "'");
    }
  }
  return config;
}

std::string to_config_text(const StudyConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "dgp=" << to_string(c.dgp.kind) << '\n'
     << "n=" << c.dgp.n << '\n'
     << "tau_shift=" << c.dgp.tau_shift << '\n'
     << "flip=" << (c.dgp.flip_treatment ? 1 : 0) << '\n'
     << "swap_betas=" << (c.dgp.swap_betas ? 1 : 0) << '\n'
     << "scenario=" << to_string(c.scenario) << '\n'
     << "methods=";
  for (std::size_t k = 0; k < c.methods.size(); ++k) os << (k ? "," : "") << c.methods[k].label;
  os << '\n'
     << "reps=" << c.replications << '\n'
     << "draws=" << c.R << '\n'
     << "burnin=" << c.burn_in << '\n'
     << "inner_draws=" << c.S << '\n'
     << "bootstrap=" << c.bootstrap_B << '\n'
     << "seed=" << c.seed << '\n';
  return os.str();
}

StudyResult run_study(const StudyConfig& config) {
  if (config.methods.empty()) throw Error(ErrorKind::config, "run_study: no methods requested");
  if (config.replications < 1) throw Error(ErrorKind::config, "run_study: reps must be positive");
  for (const auto& m : config.methods) {
    if (m.method == PMethod::frt) {
      throw Error(ErrorKind::config, "run_study: frt needs a known design");
    }
  }
  const auto scenario = apply_scenario(config.dgp.kind, config.scenario);
  const auto n_methods = config.methods.size();
  const auto reps = static_cast<std::size_t>(config.replications);

  struct Row {
    bool ok = false;
    std::vector<double> p;
    std::vector<double> t;
  };
  std::vector<Row> rows(reps);
  parallel_for(reps, config.threads, [&](std::size_t r) {
    DgpConfig dgp = config.dgp;
    dgp.seed = derive_seed(config.seed, 0x51, r);
    const auto sample = analysis_sample(generate(dgp));
    Row row;
    try {
      for (std::size_t v = 0; v < n_methods; ++v) {
        const auto& variant = config.methods[v];
        StatisticSpec spec = variant.spec;
        spec.ps_subset = scenario.ps_subset;
        spec.outcome_subset = scenario.outcome_subset;
        spec.bootstrap_B = config.bootstrap_B;
        spec.bootstrap_seed = derive_seed(config.seed, 0x53, r, v);
        const auto seed = derive_seed(config.seed, 0x52, r, v);
        PValueReport report;
        switch (variant.method) {
          case PMethod::ppp_a:
            report = ppp_algorithm_a(sample, spec, config.R, config.burn_in, seed);
            break;
          case PMethod::ppp_b:
            report = ppp_algorithm_b(sample, spec, config.R, config.burn_in, config.S, seed);
            break;
          case PMethod::normal:
            report = normal_pvalue(sample, spec);
            break;
          case PMethod::frt:
            break;
        }
        row.p.push_back(report.p_value);
        row.t.push_back(report.t_observed);
      }
      row.ok = true;
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::separation:
        case ErrorKind::singular_design:
        case ErrorKind::degenerate_variance:
        case ErrorKind::undefined_statistic:
        case ErrorKind::initialization:
        case ErrorKind::unstable_bootstrap:
          break;
        default:
          throw;
      }
    }
    rows[r] = std::move(row);
  });

  StudyResult result;
  result.replications = config.replications;
  for (const auto& m : config.methods) result.labels.push_back(m.label);
  std::size_t ok = 0;
  for (const auto& row : rows) ok += row.ok ? 1 : 0;
  result.n_failed = static_cast<int>(reps - ok);
  if (10 * static_cast<std::size_t>(result.n_failed) > reps) {
    throw Error(ErrorKind::unreliable_study,
                std::to_string(result.n_failed) + " of " + std::to_string(reps) +
                    " replications failed on the observed data");
  }
  result.p_values.resize(static_cast<Index>(ok), static_cast<Index>(n_methods));
  result.t_observed.resize(static_cast<Index>(ok), static_cast<Index>(n_methods));
  Index k = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!rows[r].ok) continue;
    for (std::size_t v = 0; v < n_methods; ++v) {
      result.p_values(k, static_cast<Index>(v)) = rows[r].p[v];
      result.t_observed(k, static_cast<Index>(v)) = rows[r].t[v];
    }
    result.replication_index.push_back(static_cast<int>(r));
    ++k;
  }
  return result;
}

}  // namespace pppv
