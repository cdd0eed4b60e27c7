#include "pppv/cli.hpp"
#include "pppv/data.hpp"
#include "pppv/simulation.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pppv;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pppv_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// The single run directory created under `out`.
fs::path only_run(const fs::path& out) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  REQUIRE(dirs.size() == 1);
  return dirs.front();
}

fs::path write_dataset(const fs::path& dir, int n, std::uint64_t seed) {
  DgpConfig c;
  c.n = n;
  c.seed = seed;
  const fs::path path = dir / "data.csv";
  write_csv(gen_regular(c).observed, path);
  return path;
}

}  // namespace

TEST_CASE("help enumerates every flag and exit code") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  for (const char* flag :
       {"--data", "--estimator", "--studentized", "--se-method", "--bootstrap", "--ps-cols",
        "--outcome-cols", "--fast", "--seed", "--threads", "--out", "--algorithm", "--draws",
        "--burnin", "--inner-draws", "--export-draws", "--design", "--propensity-file",
        "--config", "--dgp", "--scenario", "--methods", "--reps", "--n", "--tau-shift", "--flip",
        "--swap-betas", "--input"}) {
    CHECK_MESSAGE(r.out.find(flag) != std::string::npos, flag);
  }
  CHECK(r.out.find("Exit codes") != std::string::npos);
  for (const char* code : {"  0  ", "  1  ", "  2  ", "  3  ", "  4  ", "  5  "}) {
    CHECK(r.out.find(code) != std::string::npos);
  }
  const auto sub = run({"ppp", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--inner-draws") != std::string::npos);
  CHECK(sub.out.find("Exit codes") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  const auto dir = scratch("usage");
  const auto data = write_dataset(dir, 80, 1);
  const auto unknown = run({"ppp", "--data", data.string(), "--bogus"});
  CHECK(unknown.code == kExitUsage);
  CHECK(unknown.err.rfind("error code=2 kind=usage", 0) == 0);

  const auto inner = run({"ppp", "--data", data.string(), "--inner-draws", "10",
                          "--out", dir.string()});
  CHECK(inner.code == kExitUsage);

  const auto none = run({});
  CHECK(none.code == kExitUsage);

  const auto frt_no_design = run({"frt", "--data", data.string(), "--out", dir.string()});
  CHECK(frt_no_design.code == kExitUsage);

  const auto bad_col = run({"normal", "--data", data.string(), "--ps-cols", "nope",
                            "--out", dir.string()});
  CHECK(bad_col.code == kExitUsage);
}

TEST_CASE("ingestion errors exit with code 3") {
  const auto dir = scratch("ingest");
  const auto missing = run({"normal", "--data", (dir / "absent.csv").string()});
  CHECK(missing.code == kExitIngestion);
  CHECK(missing.err.find("kind=io") != std::string::npos);

  {
    std::ofstream f(dir / "bad.csv");
    f << "z,y,x1\n0,1,2\n1,1,3\n2,0,1\n";
  }
  const auto bad = run({"normal", "--data", (dir / "bad.csv").string()});
  CHECK(bad.code == kExitIngestion);
  CHECK(bad.err.find("kind=validation") != std::string::npos);
  CHECK(bad.err.find("row 3") != std::string::npos);
}

TEST_CASE("model failures exit with code 4") {
  const auto dir = scratch("model");
  {
    std::ofstream f(dir / "sep.csv");
    f << "z,y,x1\n";
    for (int i = 0; i < 30; ++i) f << (i >= 15 ? 1 : 0) << ',' << i % 7 << ',' << i << '\n';
  }
  const auto r = run({"normal", "--data", (dir / "sep.csv").string(), "--out", dir.string()});
  CHECK(r.code == kExitModel);
  CHECK(r.err.find("kind=separation") != std::string::npos);
}

TEST_CASE("ppp writes one report row and echoes its configuration") {
  const auto dir = scratch("ppp");
  const auto data = write_dataset(dir, 150, 2);
  const auto r = run({"ppp", "--data", data.string(), "--estimator", "dr", "--studentized",
                      "--draws", "100", "--burnin", "100", "--seed", "7", "--out",
                      (dir / "runs").string(), "--export-draws", (dir / "draws.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ppp_a dr studentized: p=") == 0);
  const auto run_dir = only_run(dir / "runs");
  CHECK(run_dir.filename().string().rfind("ppp-", 0) == 0);
  const auto report = slurp(run_dir / "report.csv");
  CHECK(report.rfind("method,estimator,studentized,p_value,t_observed,R,S,n_degenerate,seed\n"
                     "ppp_a,dr,1,",
                     0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 2);
  const auto config = slurp(run_dir / "config.txt");
  CHECK(config.find("draws=100") != std::string::npos);
  CHECK(config.find("seed=7") != std::string::npos);
  CHECK(config.find("threads=1") != std::string::npos);
  CHECK(slurp(dir / "draws.csv").rfind("(intercept),x1,x2,x3,x4\n", 0) == 0);
}

TEST_CASE("identical arguments give byte-identical csv for any thread count") {
  const auto dir = scratch("determinism");
  const auto data = write_dataset(dir, 120, 3);
  const std::vector<std::vector<std::string>> commands = {
      {"ppp", "--data", data.string(), "--studentized", "--draws", "60", "--burnin", "60"},
      {"ppp", "--data", data.string(), "--algorithm", "b", "--draws", "8", "--burnin", "60",
       "--inner-draws", "12"},
      {"frt", "--data", data.string(), "--design", "complete:m=60", "--inner-draws", "300"},
      {"normal", "--data", data.string(), "--se-method", "bootstrap", "--bootstrap", "100"},
  };
  for (const auto& base : commands) {
    std::string reference;
    for (const int threads : {1, 3, 1}) {
      const auto out = dir / ("t" + std::to_string(threads) + "_" + base[0]);
      fs::remove_all(out);
      auto args = base;
      for (const auto& extra : {std::string("--seed"), std::string("11"), std::string("--threads"),
                                std::to_string(threads), std::string("--out"), out.string()}) {
        args.push_back(extra);
      }
      const auto r = run(args);
      REQUIRE_MESSAGE(r.code == 0, r.err);
      const auto csv = slurp(only_run(out) / "report.csv");
      if (reference.empty()) {
        reference = csv;
      } else {
        CHECK(csv == reference);
      }
    }
  }
}

TEST_CASE("frt accepts a file of known probabilities") {
  const auto dir = scratch("frt_file");
  const auto data = write_dataset(dir, 60, 4);
  {
    std::ofstream f(dir / "e.txt");
    f << "e\n";
    for (int i = 0; i < 60; ++i) f << 0.3 + 0.005 * i << '\n';
  }
  const auto r = run({"frt", "--data", data.string(), "--propensity-file",
                      (dir / "e.txt").string(), "--inner-draws", "200", "--out",
                      (dir / "runs").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(only_run(dir / "runs") / "report.csv").find("\nfrt,dr,0,") != std::string::npos);

  const auto both = run({"frt", "--data", data.string(), "--propensity-file",
                         (dir / "e.txt").string(), "--design", "complete:m=3"});
  CHECK(both.code == kExitUsage);

  const auto bad_m = run({"frt", "--data", data.string(), "--design", "complete:m=60",
                          "--out", (dir / "bad").string()});
  CHECK(bad_m.code == kExitModel);
}

TEST_CASE("output directory falls back to the environment variable") {
  const auto dir = scratch("env");
  const auto data = write_dataset(dir, 80, 5);
  ::setenv("PPPV_OUTPUT_DIR", (dir / "from_env").string().c_str(), 1);
  const auto r = run({"normal", "--data", data.string()});
  ::unsetenv("PPPV_OUTPUT_DIR");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(only_run(dir / "from_env") / "report.csv"));
}

TEST_CASE("simulate writes p-values, summary and histograms, then summarize reads them") {
  const auto dir = scratch("simulate");
  std::string reference;
  for (const int threads : {1, 4}) {
    const auto out = dir / ("runs" + std::to_string(threads));
    const auto r = run({"simulate", "--dgp", "regular", "--scenario", "i", "--reps", "4", "--n",
                        "100", "--draws", "30", "--burnin", "30", "--seed", "1", "--methods",
                        "ppp-dr-stud,normal-dr", "--threads", std::to_string(threads), "--out",
                        out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto run_dir = only_run(out);
    CHECK(fs::exists(run_dir / "summary.csv"));
    CHECK(fs::exists(run_dir / "hist_ppp-dr-stud.svg"));
    CHECK(fs::exists(run_dir / "hist_normal-dr.svg"));
    const auto pvalues = slurp(run_dir / "pvalues.csv");
    CHECK(std::count(pvalues.begin(), pvalues.end(), '\n') == 9);
    if (reference.empty()) {
      reference = pvalues + slurp(run_dir / "summary.csv");
    } else {
      CHECK(pvalues + slurp(run_dir / "summary.csv") == reference);
    }
  }

  const auto input = only_run(dir / "runs1") / "pvalues.csv";
  const auto s = run({"summarize", "--input", input.string(), "--out", (dir / "sum").string()});
  REQUIRE_MESSAGE(s.code == 0, s.err);
  const auto sum_dir = only_run(dir / "sum");
  CHECK(slurp(sum_dir / "summary.csv") == slurp(only_run(dir / "runs1") / "summary.csv"));
}

TEST_CASE("simulate reads a configuration file and lets flags override it") {
  const auto dir = scratch("simulate_config");
  {
    std::ofstream f(dir / "study.txt");
    f << "dgp=extreme\nn=80\nreps=3\ndraws=20\nburnin=20\nmethods=normal-dr\nseed=5\n";
  }
  const auto r = run({"simulate", "--config", (dir / "study.txt").string(), "--reps", "2",
                      "--out", (dir / "runs").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto config = slurp(only_run(dir / "runs") / "config.txt");
  CHECK(config.find("dgp=extreme") != std::string::npos);
  CHECK(config.find("reps=2") != std::string::npos);
  CHECK(config.find("n=80") != std::string::npos);

  {
    std::ofstream f(dir / "broken.txt");
    f << "dgp=sideways\n";
  }
  CHECK(run({"simulate", "--config", (dir / "broken.txt").string()}).code == kExitUsage);
}
