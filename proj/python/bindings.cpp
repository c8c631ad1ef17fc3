#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "covgraph/deconv.hpp"
#include "covgraph/diagnostics.hpp"
#include "covgraph/glasso.hpp"
#include "covgraph/harness.hpp"
#include "covgraph/npn_cov.hpp"
#include "covgraph/param_cov.hpp"
#include "covgraph/synth.hpp"

namespace py = pybind11;
using namespace covgraph;

namespace {

// Samples are rows throughout, matching the CSV layout.
SampleBatch batch(const Matrix& m, SampleKind kind) { return SampleBatch(m, kind); }

py::list edge_list(const EdgeSet& e) {
  py::list out;
  for (const auto& [i, j] : e.edges()) out.append(py::make_tuple(i, j, e.sign(i, j).value_or(0)));
  return out;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_covgraph, m) {
  m.attr("__version__") = COVGRAPH_VERSION;
  py::register_exception<Error>(m, "CovgraphError", PyExc_ValueError);

  m.def("band_precision", [](int p, double rho1, double rho2) { return synth::make_band_precision(p, rho1, rho2).entries(); },
        py::arg("p"), py::arg("rho1") = 1.0, py::arg("rho2") = 0.4);
  m.def("covariance_from_precision",
        [](const Matrix& theta, bool normalize) {
          return synth::covariance_from_precision(PrecisionMatrix(theta), normalize).entries();
        },
        py::arg("theta"), py::arg("normalize") = false);
  m.def("sensing_matrix", [](int d, int p, std::uint64_t seed) { return synth::make_sensing_matrix(d, p, {seed}); },
        py::arg("d"), py::arg("p"), py::arg("seed"));
  m.def("latent_samples",
        [](const Matrix& sigma, int n, std::uint64_t seed, const std::string& marginal) {
          synth::MarginalSpec spec;
          spec.kind = synth::marginal_kind_from_string(marginal);
          const CovarianceMatrix s(sigma);
          return (spec.kind == synth::MarginalKind::GaussianIdentity ? synth::gaussian_samples(s, n, {seed})
                                                                    : synth::nonparanormal_samples(s, spec, n, {seed}))
              .data();
        },
        py::arg("sigma"), py::arg("n"), py::arg("seed"), py::arg("marginal") = "gaussian");
  m.def("sense",
        [](const Matrix& x, const Matrix& a, double sigma2, std::uint64_t seed) {
          return synth::sense(batch(x, SampleKind::LatentX), SensingSystem(a, sigma2), {seed}).data();
        },
        py::arg("x"), py::arg("a"), py::arg("sigma2"), py::arg("seed"));

  m.def("estimate_param",
        [](const Matrix& y, const Matrix& a, double sigma2, const std::string& diag) {
          if (diag != "fixed-to-one" && diag != "bias-corrected")
            throw Error(ErrorKind::InvalidInput, "python", "diag must be 'fixed-to-one' or 'bias-corrected'");
          const auto policy = diag == "fixed-to-one" ? param::DiagPolicy::FixedToOne : param::DiagPolicy::BiasCorrectedDiag;
          return param::refined_covariance(batch(y, SampleKind::ObservedY), SensingSystem(a, sigma2), policy)
              .sigma_hat.entries();
        },
        py::arg("y"), py::arg("a"), py::arg("sigma2"), py::arg("diag") = "fixed-to-one");
  m.def("reconstruct",
        [](const Matrix& y, const Matrix& a, double sigma2) {
          return deconv::least_squares_reconstruct(batch(y, SampleKind::ObservedY), SensingSystem(a, sigma2)).data();
        },
        py::arg("y"), py::arg("a"), py::arg("sigma2"));
  m.def("estimate_nonparam",
        [](const Matrix& y, const Matrix& a, double sigma2) {
          return npn::estimate_nonparam_covariance(batch(y, SampleKind::ObservedY), SensingSystem(a, sigma2))
              .sigma_hat.entries();
        },
        py::arg("y"), py::arg("a"), py::arg("sigma2"));
  m.def("deconv_cdf",
        [](const std::vector<double>& samples, const std::vector<double>& xs, double sigma2, long d, long p,
           std::optional<double> gamma, double quad_tol) {
          deconv::DeconvConfig cfg;
          cfg.gamma = gamma;
          cfg.quad_tol = quad_tol;
          cfg.validate();
          const auto noise = deconv::noise_moments(sigma2, d, p);
          const deconv::DeconvCdf cdf(samples, noise, deconv::resolve_gamma(cfg, static_cast<double>(samples.size()), noise),
                                      cfg.a, cfg.quad_tol, cfg.t_max_policy, cfg.max_nodes);
          return cdf.evaluate(xs).values;
        },
        py::arg("samples"), py::arg("xs"), py::arg("sigma2"), py::arg("d"), py::arg("p"), py::arg("gamma") = py::none(),
        py::arg("quad_tol") = 1e-6);

  m.def("glasso",
        [](const Matrix& sigma, double lam, double tol, int max_iter) {
          glasso::GlassoProblem prob;
          prob.sigma_hat = CovarianceMatrix(sigma);
          prob.lambda = lam;
          prob.tol = tol;
          prob.max_iter = max_iter;
          const auto g = glasso::solve(prob);
          py::dict out;
          out["theta"] = g.theta_hat.entries();
          out["edges"] = edge_list(g.edges);
          out["converged"] = g.converged;
          out["iterations"] = g.iterations;
          out["kkt_residual"] = g.kkt_residual;
          out["psd_repaired"] = g.psd_repaired;
          return out;
        },
        py::arg("sigma"), py::arg("lam"), py::arg("tol") = 1e-7, py::arg("max_iter") = 500);
  m.def("diagnose",
        [](const Matrix& theta, bool augmented) {
          diag::IrrepOptions opts;
          opts.augmented = augmented;
          const auto r = diag::irrepresentable_report(PrecisionMatrix(theta), opts);
          py::dict out;
          out["theta_irr"] = r.theta_irr;
          out["kappa_sigma"] = r.kappa_sigma;
          out["kappa_gamma"] = r.kappa_gamma;
          out["deg"] = r.deg;
          out["irrepresentable_holds"] = r.irrepresentable_holds;
          out["support_pairs"] = r.support_pairs;
          return out;
        },
        py::arg("theta"), py::arg("augmented") = true);
  m.def("run_experiment",
        [](const std::string& config_json, bool include_runtime) {
          const auto cfg = harness::ExperimentConfig::from_json(nlohmann::json::parse(config_json, nullptr, true, true));
          nlohmann::json result;
          {
            py::gil_scoped_release release;
            result = harness::run_experiment(cfg).to_json(include_runtime);
          }
          return json_to_py(result);
        },
        py::arg("config_json"), py::arg("include_runtime") = false);
  m.def("run_sample_experiment",
        [](const std::string& config_json, const Matrix& x, bool include_runtime) {
          const auto cfg = harness::ExperimentConfig::from_json(nlohmann::json::parse(config_json, nullptr, true, true));
          const SampleBatch batch(x, SampleKind::LatentX, "python");
          nlohmann::json result;
          {
            py::gil_scoped_release release;
            result = harness::run_sample_experiment(cfg, batch).to_json(include_runtime);
          }
          return json_to_py(result);
        },
        py::arg("config_json"), py::arg("x"), py::arg("include_runtime") = false);
}
