#include "pppv/error.hpp"
#include "pppv/estimators.hpp"
#include "pppv/ppp_engine.hpp"
#include "pppv/ps_model.hpp"
#include "pppv/resampling.hpp"
#include "pppv/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace pppv;

namespace {

ObservedSample to_sample(const Vector& z, const Vector& y, const Matrix& x) {
  return make_sample(z, y, x);
}

Columns columns_or_all(const std::optional<Columns>& cols, Index d) {
  return cols ? *cols : all_columns(d);
}

StatisticSpec make_spec(const ObservedSample& s, const std::string& estimator, bool studentized,
                        const std::optional<Columns>& ps_cols,
                        const std::optional<Columns>& outcome_cols) {
  StatisticSpec spec = default_spec(s, parse_estimator(estimator), studentized);
  spec.ps_subset = columns_or_all(ps_cols, s.d());
  spec.outcome_subset = columns_or_all(outcome_cols, s.d());
  return spec;
}

py::dict report_dict(const PValueReport& r) {
  py::dict out;
  out["method"] = std::string(to_string(r.method));
  out["estimator"] = std::string(to_string(r.estimator));
  out["studentized"] = r.studentized;
  out["p_value"] = r.p_value;
  out["t_observed"] = r.t_observed;
  out["R"] = r.R;
  out["S"] = r.S;
  out["n_degenerate"] = r.n_degenerate;
  out["seed"] = r.seed;
  out["warnings"] = r.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_pppv, m) {
  m.doc() = "Posterior predictive p-values for causal effects under unconfoundedness";

  static py::handle error_type =
      py::exception<Error>(m, "PppvError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error_type)(e.what());
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  m.def(
      "fit_logistic",
      [](const Vector& z, const Matrix& x) {
        const auto fit = fit_logistic(z, with_intercept(x));
        py::dict out;
        out["theta"] = fit.theta;
        out["e_hat"] = fit.e_hat;
        out["converged"] = fit.converged;
        out["iterations"] = fit.iterations;
        return out;
      },
      py::arg("z"), py::arg("x"), "Maximum-likelihood logistic propensity fit with intercept.");

  m.def(
      "sample_posterior",
      [](const Vector& z, const Matrix& x, int burn_in, int n_draws, std::uint64_t seed) {
        SamplerOptions options;
        options.burn_in = burn_in;
        options.n_draws = n_draws;
        options.seed = seed;
        const auto draws = sample_posterior(z, with_intercept(x), options);
        py::dict out;
        out["draws"] = draws.draws;
        out["acceptance_rate"] = draws.acceptance_rate;
        out["proposal_scale"] = draws.proposal_scale;
        return out;
      },
      py::arg("z"), py::arg("x"), py::arg("burn_in") = 1000, py::arg("n_draws") = 2000,
      py::arg("seed") = 0);

  m.def(
      "estimate",
      [](const Vector& z, const Vector& y, const Matrix& x, const std::string& estimator,
         const std::optional<Columns>& ps_cols, const std::optional<Columns>& outcome_cols) {
        const auto s = to_sample(z, y, x);
        const auto e = estimate_effect(s, parse_estimator(estimator),
                                       columns_or_all(ps_cols, s.d()),
                                       columns_or_all(outcome_cols, s.d()));
        py::dict out;
        out["tau_hat"] = e.tau_hat;
        out["se"] = e.se;
        out["t_abs"] = e.t_abs;
        return out;
      },
      py::arg("z"), py::arg("y"), py::arg("x"), py::arg("estimator") = "dr",
      py::arg("ps_cols") = py::none(), py::arg("outcome_cols") = py::none(),
      "Point estimate with its sandwich standard error.");

  m.def(
      "bootstrap_se",
      [](const Vector& z, const Vector& y, const Matrix& x, const std::string& estimator, int B,
         std::uint64_t seed, int threads) {
        const auto s = to_sample(z, y, x);
        const auto cols = all_columns(s.d());
        const auto r = bootstrap_se(s, parse_estimator(estimator), cols, cols, B, seed, threads);
        py::dict out;
        out["se"] = r.se;
        out["B"] = r.B;
        out["n_failed"] = r.n_failed;
        out["degenerate"] = r.degenerate;
        out["replicates"] = r.replicate_estimates;
        return out;
      },
      py::arg("z"), py::arg("y"), py::arg("x"), py::arg("estimator") = "dr",
      py::arg("B") = kDefaultBootstrapB, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "ppp",
      [](const Vector& z, const Vector& y, const Matrix& x, const std::string& estimator,
         bool studentized, const std::string& algorithm, int draws, int burn_in,
         int inner_draws, std::uint64_t seed, int threads, std::optional<Columns> ps_cols,
         std::optional<Columns> outcome_cols) {
        const auto s = to_sample(z, y, x);
        const auto spec = make_spec(s, estimator, studentized, ps_cols, outcome_cols);
        if (algorithm == "a") {
          return report_dict(ppp_algorithm_a(s, spec, draws, burn_in, seed, threads));
        }
        if (algorithm == "b") {
          return report_dict(
              ppp_algorithm_b(s, spec, draws, burn_in, inner_draws, seed, threads));
        }
        throw Error(ErrorKind::config, "algorithm must be 'a' or 'b'");
      },
      py::arg("z"), py::arg("y"), py::arg("x"), py::arg("estimator") = "dr",
      py::arg("studentized") = true, py::arg("algorithm") = "a", py::arg("draws") = 2000,
      py::arg("burn_in") = 1000, py::arg("inner_draws") = 100, py::arg("seed") = 0,
      py::arg("threads") = 1, py::arg("ps_cols") = py::none(),
      py::arg("outcome_cols") = py::none(), "Posterior predictive p-value.");

  m.def(
      "frt",
      [](const Vector& z, const Vector& y, const Matrix& x, const std::string& design,
         const std::optional<Vector>& probabilities, const std::string& estimator,
         bool studentized, int draws, std::uint64_t seed, int threads) {
        const auto s = to_sample(z, y, x);
        const auto spec = make_spec(s, estimator, studentized, std::nullopt, std::nullopt);
        const Design d = probabilities ? Design{BernoulliDesign{*probabilities}}
                                       : parse_design(design);
        return report_dict(frt_pvalue(s, spec, d, draws, seed, threads));
      },
      py::arg("z"), py::arg("y"), py::arg("x"), py::arg("design") = "",
      py::arg("probabilities") = py::none(), py::arg("estimator") = "dr",
      py::arg("studentized") = false, py::arg("draws") = 1000, py::arg("seed") = 0,
      py::arg("threads") = 1, "Fisher randomization test under a known design.");

  m.def(
      "normal",
      [](const Vector& z, const Vector& y, const Matrix& x, const std::string& estimator,
         const std::string& se_method, int B, std::uint64_t seed, int threads) {
        const auto s = to_sample(z, y, x);
        auto spec = make_spec(s, estimator, true, std::nullopt, std::nullopt);
        spec.se_method = parse_se_method(se_method);
        spec.bootstrap_B = B;
        spec.bootstrap_seed = seed;
        return report_dict(normal_pvalue(s, spec, threads));
      },
      py::arg("z"), py::arg("y"), py::arg("x"), py::arg("estimator") = "dr",
      py::arg("se_method") = "sandwich", py::arg("B") = kDefaultBootstrapB, py::arg("seed") = 0,
      py::arg("threads") = 1);

  m.def(
      "generate",
      [](const std::string& dgp, int n, double tau_shift, bool flip, std::uint64_t seed) {
        DgpConfig c;
        c.kind = parse_dgp(dgp);
        c.n = n;
        c.tau_shift = tau_shift;
        c.flip_treatment = flip;
        c.seed = seed;
        const auto sim = generate(c);
        py::dict out;
        out["z"] = sim.observed.z;
        out["y"] = sim.observed.y;
        out["x"] = sim.observed.x;
        out["w"] = sim.w;
        out["y1"] = sim.y1;
        out["y0"] = sim.y0;
        out["propensity"] = sim.propensity;
        out["true_tau"] = sim.true_tau;
        return out;
      },
      py::arg("dgp") = "regular", py::arg("n") = 1000, py::arg("tau_shift") = 0.0,
      py::arg("flip") = false, py::arg("seed") = 0, "Simulated sample from a built-in design.");

  m.def(
      "run_study",
      [](const std::string& config_text) {
        std::istringstream in(config_text);
        const auto result = run_study(parse_study_config(in));
        py::dict out;
        out["labels"] = result.labels;
        out["p_values"] = result.p_values;
        out["n_failed"] = result.n_failed;
        py::list summaries;
        for (const auto& v : summarize(result)) {
          py::dict row;
          row["label"] = v.label;
          row["rejection"] = v.rejection;
          row["ks"] = v.ks;
          summaries.append(row);
        }
        out["summary"] = summaries;
        return out;
      },
      py::arg("config"), "Runs a simulation study from key=value configuration text.");

  m.def("ks_uniform", &ks_uniform, py::arg("p_values"));
}
