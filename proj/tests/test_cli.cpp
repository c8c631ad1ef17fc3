#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "covgraph/cli.hpp"
#include "covgraph/csv.hpp"
#include "covgraph/diagnostics.hpp"
#include "covgraph/glasso.hpp"
#include "covgraph/param_cov.hpp"
#include "covgraph/synth.hpp"
#include "test_util.hpp"

using namespace covgraph;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "covgraph");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth writes the band precision") {
  const auto dir = covgraph::testing::scratch_dir("cli_synth");
  const Run r = invoke({"synth", "--p", "4", "--rho2", "0.3", "--out", (dir / "theta.csv").string()});
  REQUIRE(r.code == 0);
  const Matrix theta = csv::read_matrix(dir / "theta.csv");
  CHECK(theta == synth::make_band_precision(4, 1.0, 0.3).entries());
}

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  const auto dir = covgraph::testing::scratch_dir("cli_usage");
  const Run r = invoke({"synth", "--p", "4", "--n", "10", "--out", (dir / "t.csv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--seed") != std::string::npos);
  CHECK(invoke({"glasso", "--sigma", "x.csv", "--out", "y.csv"}).code == 2);
}

TEST_CASE("runtime errors exit 1 with one JSON object") {
  const auto dir = covgraph::testing::scratch_dir("cli_runtime");
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "1,2\n3\n";
  }
  const Run r = invoke({"glasso", "--sigma", (dir / "bad.csv").string(), "--lambda", "0.1", "--out",
                     (dir / "o.csv").string()});
  CHECK(r.code == 1);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.contains("error"));
  CHECK(j.contains("message"));
}

TEST_CASE("glasso output matches the library bit for bit") {
  const auto dir = covgraph::testing::scratch_dir("cli_glasso");
  const Matrix s = covgraph::testing::random_spd(6, 21, 0.3);
  csv::write_matrix(dir / "s.csv", s);
  const Run r = invoke({"glasso", "--sigma", (dir / "s.csv").string(), "--lambda", "0.05", "--out",
                     (dir / "theta.csv").string(), "--edges", "-"});
  REQUIRE(r.code == 0);
  glasso::GlassoProblem prob;
  prob.sigma_hat = CovarianceMatrix(csv::read_matrix(dir / "s.csv"));
  prob.lambda = 0.05;
  const glasso::GraphEstimate lib = glasso::solve(prob);
  CHECK(csv::read_matrix(dir / "theta.csv") == lib.theta_hat.entries());
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["schema"] == cli::kEdgesSchema);
  CHECK(j["edges"].size() == lib.edges.size());
}

TEST_CASE("diagnose reports the library values") {
  const auto dir = covgraph::testing::scratch_dir("cli_diag");
  const PrecisionMatrix theta = synth::make_band_precision(5, 1.0, 0.2);
  csv::write_matrix(dir / "theta.csv", theta.entries());
  for (bool strict : {false, true}) {
    std::vector<std::string> args = {"diagnose", "--theta", (dir / "theta.csv").string()};
    if (strict) args.push_back("--strict");
    const Run r = invoke(args);
    REQUIRE(r.code == 0);
    diag::IrrepOptions opts;
    opts.augmented = !strict;
    const diag::TheoryReport lib = diag::irrepresentable_report(PrecisionMatrix(csv::read_matrix(dir / "theta.csv")), opts);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["theta_irr"].get<double>() == lib.theta_irr);
    CHECK(j["kappa_gamma"].get<double>() == lib.kappa_gamma);
    CHECK(j["augmented"].get<bool>() == !strict);
  }
  CHECK(invoke({"diagnose", "--theta", (dir / "theta.csv").string(), "--ceiling", "3"}).code == 1);
}

TEST_CASE("synth samples feed estimate-param and deconv-cdf") {
  const auto dir = covgraph::testing::scratch_dir("cli_pipeline");
  const auto f = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(invoke({"synth", "--p", "5", "--out", f("theta.csv"), "--n", "40", "--seed", "7", "--d", "12", "--sigma2",
               "0.2", "--a-out", f("a.csv"), "--y-out", f("y.csv"), "--x-out", f("x.csv")})
              .code == 0);
  CHECK(std::filesystem::exists(f("y.csv") + ".json"));

  const Run r = invoke({"estimate-param", "--y", f("y.csv"), "--a", f("a.csv"), "--sigma2", "0.2", "--out",
                     f("sigma.csv"), "--report", "-"});
  REQUIRE(r.code == 0);
  const SensingSystem sys(csv::read_matrix(f("a.csv")), 0.2);
  const SampleBatch y = synth::read_batch(f("y.csv"), SampleKind::ObservedY);
  const auto lib = param::refined_covariance(y, sys, param::DiagPolicy::FixedToOne);
  CHECK(csv::read_matrix(f("sigma.csv")) == lib.sigma_hat.entries());
  CHECK(nlohmann::json::parse(r.out)["scaling_constant"].get<double>() == lib.scaling_constant);

  const Run dc = invoke({"deconv-cdf", "--samples", f("x.csv"), "--sigma2", "0.2", "--d", "12", "--p", "5", "--lo", "-2",
                      "--hi", "2", "--points", "9", "--out", f("cdf.csv")});
  REQUIRE(dc.code == 0);
  const Matrix table = csv::read_matrix(f("cdf.csv"));
  CHECK(table.rows() == 9);
  CHECK(table.cols() == 3);
  CHECK(table(0, 0) == -2.0);
  CHECK(table(8, 0) == 2.0);
}

TEST_CASE("experiment writes its four artifacts") {
  const auto dir = covgraph::testing::scratch_dir("cli_experiment");
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"pipeline": "parametric", "graph": {"p": 6}, "grid": {"n": [40], "d": [20], "sigma2": [0.1]},
              "trials": 2, "seed": 3, "lambda": {"policy": "path", "points": 5}})";
  }
  const Run r = invoke({"experiment", "--config", (dir / "cfg.json").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  for (const char* name : {"results.json", "runtime.json", "cells.csv", "trials.csv"})
    CHECK(std::filesystem::exists(dir / "out" / name));
  CHECK(nlohmann::json::parse(slurp(dir / "out" / "results.json")).contains("cells"));
}

TEST_CASE("installed binary honours the exit code contract") {
  const std::string bin = COVGRAPH_CLI_PATH;
  const auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(bin + " --version") == 0);
  CHECK(status(bin + " --help") == 0);
  CHECK(status(bin + " nonsense") == 2);
  CHECK(status(bin + " glasso --sigma /nonexistent.csv --lambda 0.1 --out /tmp/x.csv") == 1);
}

TEST_CASE("experiment on measured samples") {
  const auto dir = covgraph::testing::scratch_dir("cli_samples");
  const CovarianceMatrix sigma = synth::covariance_from_precision(synth::make_band_precision(6, 1.0, 0.4), true);
  const Matrix x = synth::gaussian_samples(sigma, 120, {3}).data();
  {
    std::ofstream out(dir / "x.csv");
    out << "g0,g1,g2,g3,g4,g5\n";
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) out << x(i, j) << (j + 1 < x.cols() ? "," : "\n");
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"pipeline": "parametric", "graph": {"p": 6}, "grid": {"n": [50], "d": [40], "sigma2": [0.1]},
              "trials": 2, "seed": 3, "lambda": {"policy": "path", "criterion": "fixed-target"}})";
  }
  const Run r = invoke({"experiment", "--config", (dir / "cfg.json").string(), "--out", (dir / "out").string(),
                        "--samples", (dir / "x.csv").string(), "--header", "--standardize"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "results.json"));
  CHECK(j["truth"]["source"] == "samples");
  CHECK(j["cells"][0]["n"] == 120);
  CHECK(invoke({"experiment", "--config", (dir / "cfg.json").string(), "--out", (dir / "o2").string(), "--header"})
            .code == 2);
}
