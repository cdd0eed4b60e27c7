#include "pppv/cli.hpp"

#include "pppv/data.hpp"
#include "pppv/error.hpp"
#include "pppv/ppp_engine.hpp"
#include "pppv/simulation.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pppv {

namespace {

namespace fs = std::filesystem;

constexpr const char* kOutputEnv = "PPPV_OUTPUT_DIR";
constexpr const char* kDefaultOutput = "pppv_runs";

const char* kFooter =
    "Outputs go to <out>/<command>-<config hash>/ with the resolved configuration\n"
    "echoed to config.txt. --out defaults to $PPPV_OUTPUT_DIR, else ./pppv_runs.\n"
    "\n"
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown flag, invalid combination)\n"
    "  3  ingestion error (missing, malformed or invalid input file)\n"
    "  4  model failure (separation, singular design, zero standard error,\n"
    "     undefined observed statistic, bad design)\n"
    "  5  reliability failure (unstable bootstrap, too many failed replications)\n";

struct StatisticOptions {
  std::string estimator = "dr";
  bool studentized = false;
  std::string se_method = "sandwich";
  int bootstrap_B = kDefaultBootstrapB;
  std::string ps_cols;
  std::string outcome_cols;
  bool fast = false;
};

struct CommonOptions {
  std::string data;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format:
    case ErrorKind::parse:
    case ErrorKind::validation:
    case ErrorKind::io:
      return kExitIngestion;
    case ErrorKind::config:
      return kExitUsage;
    case ErrorKind::unstable_bootstrap:
    case ErrorKind::unreliable_study:
      return kExitReliability;
    default:
      return kExitModel;
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

fs::path run_directory(const std::string& out, const std::string& command,
                       const std::string& config_text) {
  fs::path base = out;
  if (base.empty()) {
    const char* env = std::getenv(kOutputEnv);
    base = (env != nullptr && *env != '\0') ? env : kDefaultOutput;
  }
  std::ostringstream stamp;
  stamp << command << '-' << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config_text);
  const fs::path dir = base / stamp.str();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
}

void add_statistic_options(CLI::App* cmd, StatisticOptions& s, bool allow_unstudentized) {
  cmd->add_option("--estimator", s.estimator, "Effect estimator: ipw, reg or dr")
      ->check(CLI::IsMember({"ipw", "reg", "dr"}))
      ->capture_default_str();
  if (allow_unstudentized) {
    cmd->add_flag("--studentized", s.studentized, "Divide |estimate| by its standard error");
  }
  cmd->add_option("--se-method", s.se_method, "Standard error: sandwich or bootstrap")
      ->check(CLI::IsMember({"sandwich", "bootstrap"}))
      ->capture_default_str();
  cmd->add_option("--bootstrap", s.bootstrap_B, "Bootstrap resamples when --se-method bootstrap")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  cmd->add_option("--ps-cols", s.ps_cols,
                  "Comma-separated covariates for the propensity model ('all', 'none')");
  cmd->add_option("--outcome-cols", s.outcome_cols,
                  "Comma-separated covariates for the outcome models ('all', 'none')");
  if (allow_unstudentized) {
    cmd->add_flag("--fast", s.fast, "Freeze the outcome fit across synthetic draws");
  }
}

void add_common_options(CLI::App* cmd, CommonOptions& c, bool needs_data) {
  if (needs_data) {
    cmd->add_option("--data", c.data, "Input CSV with columns z, y and covariates")->required();
  }
  cmd->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory (default $PPPV_OUTPUT_DIR or ./pppv_runs)");
}

StatisticSpec build_spec(const ObservedSample& sample, const StatisticOptions& s,
                         std::uint64_t seed) {
  StatisticSpec spec;
  spec.estimator = parse_estimator(s.estimator);
  spec.studentized = s.studentized;
  spec.se_method = parse_se_method(s.se_method);
  spec.bootstrap_B = s.bootstrap_B;
  spec.bootstrap_seed = derive_seed(seed, 0xb5);
  spec.ps_subset = resolve_columns(sample, s.ps_cols);
  spec.outcome_subset = resolve_columns(sample, s.outcome_cols);
  spec.freeze_outcome = s.fast;
  if (spec.se_method == SeMethod::bootstrap && !spec.studentized) {
    throw UsageError("--se-method bootstrap requires --studentized");
  }
  return spec;
}

std::string statistic_config(const StatisticOptions& s, const CommonOptions& c) {
  std::ostringstream os;
  os << "data=" << c.data << '\n'
     << "estimator=" << s.estimator << '\n'
     << "studentized=" << (s.studentized ? 1 : 0) << '\n'
     << "se_method=" << s.se_method << '\n'
     << "bootstrap=" << s.bootstrap_B << '\n'
     << "ps_cols=" << (s.ps_cols.empty() ? "all" : s.ps_cols) << '\n'
     << "outcome_cols=" << (s.outcome_cols.empty() ? "all" : s.outcome_cols) << '\n'
     << "fast=" << (s.fast ? 1 : 0) << '\n'
     << "seed=" << c.seed << '\n';
  return os.str();
}

void emit_report(const PValueReport& report, const std::string& command,
                 const std::string& config_text, const CommonOptions& c, std::ostream& out,
                 std::ostream& err) {
  const auto dir = run_directory(c.out, command, config_text);
  write_text(dir / "config.txt", config_text + "threads=" + std::to_string(c.threads) + '\n');
  write_text(dir / "report.csv", report_csv_header() + '\n' + to_csv_row(report) + '\n');
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  out << std::setprecision(6) << to_string(report.method) << ' ' << to_string(report.estimator)
      << (report.studentized ? " studentized" : "") << ": p=" << report.p_value
      << " t_obs=" << report.t_observed << " R=" << report.R << " S=" << report.S
      << " degenerate=" << report.n_degenerate << " -> " << (dir / "report.csv").string()
      << '\n';
}

Vector read_probability_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(line, &used));
      if (used != line.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      if (line_no == 1 && values.empty()) continue;  // header
      throw Error(ErrorKind::parse, path + ": non-numeric probability on line " +
                                        std::to_string(line_no));
    }
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Posterior predictive p-values for the no-effect null in observational studies",
               "pppv"};
  app.footer(kFooter);
  app.require_subcommand(1);

  StatisticOptions stat;
  CommonOptions common;

  auto* ppp = app.add_subcommand("ppp", "Posterior predictive p-value");
  add_common_options(ppp, common, true);
  add_statistic_options(ppp, stat, true);
  std::string algorithm = "a";
  int draws = 2000;
  int burn_in = 1000;
  int inner = 200;
  std::string export_draws;
  ppp->add_option("--algorithm", algorithm, "a: joint simulation; b: averaged FRT")
      ->check(CLI::IsMember({"a", "b"}))
      ->capture_default_str();
  ppp->add_option("--draws", draws, "Retained posterior draws R")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ppp->add_option("--burnin", burn_in, "Sampler burn-in iterations")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  auto* ppp_inner = ppp->add_option("--inner-draws", inner, "Assignments per draw S (algorithm b)")
                        ->check(CLI::PositiveNumber)
                        ->capture_default_str();
  ppp->add_option("--export-draws", export_draws, "Also write the posterior draws to this CSV");

  auto* frt = app.add_subcommand("frt", "Fisher randomization test under a known design");
  add_common_options(frt, common, true);
  add_statistic_options(frt, stat, true);
  std::string design_text;
  std::string propensity_file;
  int frt_draws = 10000;
  auto* design_opt =
      frt->add_option("--design", design_text, "complete:m=<treated> or bernoulli:p=<prob>");
  auto* propensity_opt = frt->add_option(
      "--propensity-file", propensity_file,
      "Known per-unit treatment probabilities, one per line (Bernoulli design)");
  design_opt->excludes(propensity_opt);
  frt->add_option("--inner-draws", frt_draws, "Randomization draws S")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* normal = app.add_subcommand("normal", "Normal approximation for the studentized estimator");
  add_common_options(normal, common, true);
  add_statistic_options(normal, stat, false);

  auto* simulate = app.add_subcommand("simulate", "Replicated simulation study");
  add_common_options(simulate, common, false);
  std::string config_file;
  std::string dgp = "regular";
  std::string scenario = "i";
  std::string methods = "ppp-dr-stud,normal-dr";
  StudyConfig study;
  simulate->add_option("--config", config_file, "key=value study file; flags override it");
  auto* o_dgp = simulate->add_option("--dgp", dgp, "regular or extreme")
                    ->check(CLI::IsMember({"regular", "extreme"}))
                    ->capture_default_str();
  auto* o_scn = simulate->add_option("--scenario", scenario, "Model specification i, ii, iii, iv")
                    ->check(CLI::IsMember({"i", "ii", "iii", "iv"}))
                    ->capture_default_str();
  auto* o_methods =
      simulate->add_option("--methods", methods,
                           "Comma list: ppp|pppb|normal - ipw|reg|dr [-stud] [-boot] [-fast]")
          ->capture_default_str();
  auto* o_reps = simulate->add_option("--reps", study.replications, "Replications")
                     ->check(CLI::PositiveNumber)
                     ->capture_default_str();
  auto* o_n = simulate->add_option("--n", study.dgp.n, "Units per replication")
                  ->check(CLI::Range(50, 100000000))
                  ->capture_default_str();
  auto* o_tau = simulate->add_option("--tau-shift", study.dgp.tau_shift, "mu_1 - mu_0")
                    ->capture_default_str();
  auto* o_flip = simulate->add_flag("--flip", study.dgp.flip_treatment,
                                    "Swap treated and control labels after generation");
  auto* o_swap = simulate->add_flag("--swap-betas", study.dgp.swap_betas,
                                    "Give each arm the other arm's outcome slopes");
  auto* o_draws = simulate->add_option("--draws", study.R, "Posterior draws R per PPP")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
  auto* o_burn = simulate->add_option("--burnin", study.burn_in, "Sampler burn-in")
                     ->check(CLI::NonNegativeNumber)
                     ->capture_default_str();
  auto* o_inner = simulate->add_option("--inner-draws", study.S, "Inner draws S (pppb)")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
  auto* o_boot = simulate->add_option("--bootstrap", study.bootstrap_B, "Bootstrap resamples B")
                     ->check(CLI::Range(2, 1000000))
                     ->capture_default_str();
  study.dgp.n = 500;

  auto* summarize_cmd = app.add_subcommand("summarize", "Summarize a p-value CSV");
  std::string input;
  summarize_cmd->add_option("--input", input, "pvalues.csv written by simulate")->required();
  summarize_cmd->add_option("--out", common.out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    const auto parsed = app.get_subcommands();
    if (parsed.empty()) {
      out << app.help("", CLI::AppFormatMode::All);
    } else {
      out << parsed.front()->help() << kFooter;
    }
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error code=" << kExitUsage << " kind=usage message=" << quote(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (ppp->parsed()) {
      if (algorithm == "a" && ppp_inner->count() > 0) {
        throw UsageError("--inner-draws only applies to --algorithm b");
      }
      const auto sample = load_csv(common.data);
      const auto spec = build_spec(sample, stat, common.seed);
      std::ostringstream cfg;
      cfg << "command=ppp\n" << statistic_config(stat, common) << "algorithm=" << algorithm
          << "\ndraws=" << draws << "\nburnin=" << burn_in << '\n';
      if (algorithm == "b") cfg << "inner_draws=" << inner << '\n';
      const auto report =
          algorithm == "a"
              ? ppp_algorithm_a(sample, spec, draws, burn_in, common.seed, common.threads)
              : ppp_algorithm_b(sample, spec, draws, burn_in, inner, common.seed,
                                common.threads);
      if (!export_draws.empty()) {
        SamplerOptions options;
        options.burn_in = burn_in;
        options.n_draws = draws;
        options.seed = derive_seed(common.seed, 1);
        std::ofstream f(export_draws);
        if (!f) throw Error(ErrorKind::io, "cannot write " + export_draws);
        write_draws_csv(sample_posterior(sample, spec.ps_subset, options), f);
      }
      emit_report(report, "ppp", cfg.str(), common, out, err);
    } else if (frt->parsed()) {
      if (design_text.empty() && propensity_file.empty()) {
        throw UsageError("frt needs --design or --propensity-file");
      }
      const auto sample = load_csv(common.data);
      const auto spec = build_spec(sample, stat, common.seed);
      const Design design = propensity_file.empty()
                                ? parse_design(design_text)
                                : Design{BernoulliDesign{read_probability_file(propensity_file)}};
      std::ostringstream cfg;
      cfg << "command=frt\n" << statistic_config(stat, common) << "design="
          << (propensity_file.empty() ? describe(design) : "bernoulli:file=" + propensity_file)
          << "\ninner_draws=" << frt_draws << '\n';
      emit_report(frt_pvalue(sample, spec, design, frt_draws, common.seed, common.threads),
                  "frt", cfg.str(), common, out, err);
    } else if (normal->parsed()) {
      stat.studentized = true;
      const auto sample = load_csv(common.data);
      const auto spec = build_spec(sample, stat, common.seed);
      std::ostringstream cfg;
      cfg << "command=normal\n" << statistic_config(stat, common);
      emit_report(normal_pvalue(sample, spec, common.threads), "normal", cfg.str(), common, out,
                  err);
    } else if (simulate->parsed()) {
      StudyConfig resolved;
      resolved.dgp.n = 500;
      resolved.methods = {parse_method("ppp-dr-stud"), parse_method("normal-dr")};
      if (!config_file.empty()) {
        std::ifstream f(config_file);
        if (!f) throw Error(ErrorKind::io, "cannot open " + config_file);
        resolved = parse_study_config(f);
        if (resolved.methods.empty()) {
          resolved.methods = {parse_method("ppp-dr-stud"), parse_method("normal-dr")};
        }
      }
      if (config_file.empty() || o_dgp->count()) resolved.dgp.kind = parse_dgp(dgp);
      if (config_file.empty() || o_scn->count()) resolved.scenario = parse_scenario(scenario);
      if (config_file.empty() || o_methods->count()) {
        resolved.methods.clear();
        std::stringstream ss(methods);
        std::string token;
        while (std::getline(ss, token, ',')) resolved.methods.push_back(parse_method(token));
      }
      if (config_file.empty() || o_reps->count()) resolved.replications = study.replications;
      if (config_file.empty() || o_n->count()) resolved.dgp.n = study.dgp.n;
      if (config_file.empty() || o_tau->count()) resolved.dgp.tau_shift = study.dgp.tau_shift;
      if (config_file.empty() || o_flip->count()) {
        resolved.dgp.flip_treatment = study.dgp.flip_treatment;
      }
      if (config_file.empty() || o_swap->count()) resolved.dgp.swap_betas = study.dgp.swap_betas;
      if (config_file.empty() || o_draws->count()) resolved.R = study.R;
      if (config_file.empty() || o_burn->count()) resolved.burn_in = study.burn_in;
      if (config_file.empty() || o_inner->count()) resolved.S = study.S;
      if (config_file.empty() || o_boot->count()) resolved.bootstrap_B = study.bootstrap_B;
      if (config_file.empty() || simulate->get_option("--seed")->count()) {
        resolved.seed = common.seed;
      }
      if (config_file.empty() || simulate->get_option("--threads")->count()) {
        resolved.threads = common.threads;
      }
      if (resolved.dgp.n < 50) throw UsageError("--n must be at least 50");

      const auto config_text = "command=simulate\n" + to_config_text(resolved);
      const auto result = run_study(resolved);
      const auto dir = run_directory(common.out, "simulate", config_text);
      write_text(dir / "config.txt",
                 config_text + "threads=" + std::to_string(resolved.threads) + '\n');
      write_study_outputs(result, dir);
      const auto summary = summarize(result);
      out << std::setprecision(4) << "simulate " << to_string(resolved.dgp.kind) << '/'
          << to_string(resolved.scenario) << ": " << result.p_values.rows() << " of "
          << result.replications << " replications;";
      for (const auto& s : summary) out << ' ' << s.label << " reject@0.05=" << s.rejection[1];
      out << " -> " << dir.string() << '\n';
    } else if (summarize_cmd->parsed()) {
      std::ifstream f(input);
      if (!f) throw Error(ErrorKind::io, "cannot open " + input);
      const auto result = read_pvalues_csv(f);
      if (result.p_values.rows() == 0) throw Error(ErrorKind::format, "no p-values in " + input);
      const auto config_text = "command=summarize\ninput=" + input + '\n';
      const auto dir = run_directory(common.out, "summarize", config_text);
      write_text(dir / "config.txt", config_text);
      const auto summary = summarize(result);
      {
        std::ofstream s(dir / "summary.csv");
        if (!s) throw Error(ErrorKind::io, "cannot write summary.csv");
        write_summary_csv(summary, s);
      }
      for (const auto& s : summary) write_text(dir / ("hist_" + s.label + ".svg"), histogram_svg(s));
      out << "summarize: " << summary.size() << " methods, " << result.p_values.rows()
          << " replications -> " << dir.string() << '\n';
    }
  } catch (const UsageError& e) {
    err << "error code=" << kExitUsage << " kind=usage message=" << quote(e.what()) << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    err << "error code=" << code << " kind=" << to_string(e.kind())
        << " message=" << quote(e.what()) << '\n';
    return code;
  } catch (const std::exception& e) {
    err << "error code=" << kExitInternal << " kind=internal message=" << quote(e.what()) << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace pppv
