#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "crowdest/cli.hpp"

using namespace crowdest;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return CliResult{code, out.str(), err.str()};
}

std::filesystem::path tmp_dir() {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "crowdest_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const std::filesystem::path path = tmp_dir() / name;
  std::ofstream f(path);
  f << content;
  f.close();
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Answer files for the worked pooled-pair state: sample means 9, 7, 8.
std::string pooled_samples() {
  return write_file("pooled.csv",
                    "variable,value\n"
                    "1,8\n1,10\n"
                    "2,6\n2,8\n"
                    "3,7\n3,9\n");
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"--help"}).out.find("simulate") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"estimate"}).code == 2);  // missing required options
  CHECK(run({"estimate", "--samples", "x.csv", "--constraints", "chain:2", "--bogus"}).code == 2);
}

TEST_CASE("estimate pools the violating pair") {
  const CliResult r =
      run({"estimate", "--samples", pooled_samples(), "--constraints", "chain:3"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["n_vars"] == 3);
  CHECK(doc["feasible"] == true);
  CHECK(doc["means"][0].get<double>() == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(doc["means"][1].get<double>() == doctest::Approx(7.5).epsilon(1e-9));
  CHECK(doc["means"][2].get<double>() == doctest::Approx(7.5).epsilon(1e-9));
  const json& v2 = doc["variables"][1];
  CHECK(v2["index"] == 2);
  CHECK(v2["count"] == 2);
  CHECK(v2["sample_mean"].get<double>() == doctest::Approx(7.0));
  CHECK(v2["sample_variance"].get<double>() == doctest::Approx(1.0));
  CHECK(v2["constrained_mean"].get<double>() == doctest::Approx(7.5).epsilon(1e-9));
  CHECK(v2["variance"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
}

TEST_CASE("estimate fills unsampled chain positions") {
  const std::string samples = write_file("gap.csv",
                                         "1,8\n1,8\n"
                                         "3,4\n3,4\n");
  const CliResult r = run({"estimate", "--samples", samples, "--constraints", "chain:3"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["means"][1].get<double>() == doctest::Approx(6.0).epsilon(1e-12));
  const json& v2 = doc["variables"][1];
  CHECK(v2["count"] == 0);
  CHECK(v2["sample_mean"].is_null());
  // Point-mass endpoints: the filled variance is the pure order-statistic
  // value (a-b)^2 / 12 for the middle of a two-gap span.
  CHECK(v2["variance"].get<double>() == doctest::Approx(16.0 / 12.0).epsilon(1e-11));
}

TEST_CASE("estimate failure modes") {
  const CliResult missing =
      run({"estimate", "--samples", "/nonexistent.csv", "--constraints", "chain:2"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error:") != std::string::npos);
  // A variable label beyond the constraint width is a config error.
  const std::string samples = write_file("toobig.csv", "4,1.0\n");
  CHECK(run({"estimate", "--samples", samples, "--constraints", "chain:3"}).code == 2);
}

TEST_CASE("next reports baseline picks without scores") {
  const std::string samples = write_file("two.csv", "1,5\n1,6\n");
  const CliResult r = run({"next", "--samples", samples, "--constraints", "chain:2", "--loss",
                           "squared", "--mode", "round_robin"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["variable"] == 2);
  CHECK(doc["mode"] == "round_robin");
  CHECK(doc["scores"].is_null());
}

TEST_CASE("next reports null scores while bootstrapping anchors") {
  const std::string samples = write_file("anchor.csv", "1,5\n1,6\n");
  const CliResult r = run({"next", "--samples", samples, "--constraints", "chain:2", "--loss",
                           "threshold:5.5"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["mode"] == "constrained");
  CHECK(doc["variable"] == 2);
  CHECK(doc["scores"].is_null());
}

TEST_CASE("next scores candidates once the floor is met") {
  const std::string samples = write_file("scored.csv",
                                         "1,8\n1,9\n"
                                         "2,4\n2,5\n");
  const std::vector<std::string> args = {"next",    "--samples",     samples,
                                         "--constraints", "chain:2", "--loss",
                                         "threshold:6",   "--seed",  "5"};
  const CliResult r1 = run(args);
  REQUIRE(r1.code == 0);
  const json doc = json::parse(r1.out);
  REQUIRE(doc["scores"].is_array());
  CHECK(doc["scores"].size() == 2);
  CHECK(doc["scores"][0].is_number());
  CHECK(doc["variable"].get<int>() >= 1);
  CHECK(doc["variable"].get<int>() <= 2);
  // Byte-identical rerun under the same seed.
  CHECK(run(args).out == r1.out);
}

TEST_CASE("next with independent mode reports the analytic scores") {
  const std::string samples = write_file("indep.csv",
                                         "1,3\n1,5\n1,7\n"
                                         "2,3\n2,5\n2,7\n");
  const CliResult r = run({"next", "--samples", samples, "--constraints", "chain:2", "--loss",
                           "squared", "--mode", "independent"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["variable"] == 1);  // tie: lower index
  CHECK(doc["scores"][0].get<double>() == doctest::Approx(19.0 / 72.0).epsilon(1e-11));
  CHECK(doc["scores"][1].get<double>() == doctest::Approx(19.0 / 72.0).epsilon(1e-11));
}

TEST_CASE("next rejects a bad loss spec") {
  const std::string samples = write_file("badloss.csv", "1,5\n");
  CHECK(run({"next", "--samples", samples, "--constraints", "chain:2", "--loss", "huber"}).code ==
        2);
}

TEST_CASE("interpolate between two endpoint models") {
  const std::string models = write_file("models.csv",
                                        "index,mean,variance\n"
                                        "1,8,0\n"
                                        "5,4,0\n");
  const CliResult r = run({"interpolate", "--models", models, "--k", "3"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["left_index"] == 1);
  CHECK(doc["right_index"] == 5);
  CHECK(doc["k"] == 3);
  CHECK(doc["mean"].get<double>() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(doc["variance"].get<double>() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(doc["variance_closed"].get<double>() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(doc["draws"] == 10000);

  // Row order in the file does not matter.
  const std::string reversed = write_file("models_rev.csv", "5,4,0\n1,8,0\n");
  const CliResult r2 = run({"interpolate", "--models", reversed, "--k", "4"});
  REQUIRE(r2.code == 0);
  CHECK(json::parse(r2.out)["mean"].get<double>() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("interpolate failure modes") {
  const std::string models = write_file("models_ok.csv", "1,8,0\n5,4,0\n");
  CHECK(run({"interpolate", "--models", models, "--k", "5"}).code == 2);  // k not interior
  const std::string three = write_file("models_three.csv", "1,8,0\n3,6,0\n5,4,0\n");
  CHECK(run({"interpolate", "--models", three, "--k", "2"}).code == 2);
  const std::string junk = write_file("models_junk.csv", "1,8\n5,4,0\n");
  CHECK(run({"interpolate", "--models", junk, "--k", "2"}).code == 2);
}

TEST_CASE("simulate writes traces and a summary deterministically") {
  const std::string trace_path = (tmp_dir() / "sim_trace.csv").string();
  const std::string summary_path = (tmp_dir() / "sim_summary.json").string();
  const std::string config = write_file("sim.cfg",
                                        "n_vars = 3\n"
                                        "ground_truth = linear_decreasing\n"
                                        "worker_sd = 1.0\n"
                                        "loss = threshold\n"
                                        "tau = 6\n"
                                        "policies = constrained, round_robin\n"
                                        "budget = 6\n"
                                        "replicates = 2\n"
                                        "seed = 21\n"
                                        "hypothetical_draws = 8\n"
                                        "fill_draws = 32\n"
                                        "trace_path = " + trace_path + "\n"
                                        "summary_path = " + summary_path + "\n");
  const CliResult r1 = run({"simulate", "--config", config});
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("policy constrained:") != std::string::npos);
  CHECK(r1.out.find("policy round_robin:") != std::string::npos);
  CHECK(r1.out.find("summary " + summary_path) != std::string::npos);

  // Multi-policy runs suffix the trace path per policy.
  const std::string ctrace = (tmp_dir() / "sim_trace.constrained.csv").string();
  const std::string rtrace = (tmp_dir() / "sim_trace.round_robin.csv").string();
  REQUIRE(std::filesystem::exists(ctrace));
  REQUIRE(std::filesystem::exists(rtrace));
  const std::string ctrace_bytes = read_file(ctrace);
  const std::string summary_bytes = read_file(summary_path);
  CHECK(ctrace_bytes.rfind("step,variable,answer,true_loss,estimated_error,prediction_json\n",
                           0) == 0);

  const json summary = json::parse(summary_bytes);
  CHECK(summary["seed"] == 21);
  CHECK(summary["policies"]["constrained"]["final_true_losses"].size() == 2);
  CHECK(summary["policies"]["constrained"]["trace_path"] == ctrace);
  CHECK(summary["policies"]["round_robin"]["mean_true_loss"].size() == 6);

  // Rerunning reproduces both outputs byte for byte.
  const CliResult r2 = run({"simulate", "--config", config});
  REQUIRE(r2.code == 0);
  CHECK(r2.out == r1.out);
  CHECK(read_file(ctrace) == ctrace_bytes);
  CHECK(read_file(summary_path) == summary_bytes);

  // A seed override lands in the summary and changes the run.
  const CliResult r3 = run({"--seed", "99", "simulate", "--config", config});
  REQUIRE(r3.code == 0);
  CHECK(json::parse(read_file(summary_path))["seed"] == 99);
}

TEST_CASE("simulate with one policy keeps the trace path exact") {
  const std::string trace_path = (tmp_dir() / "single_trace.csv").string();
  const std::string summary_path = (tmp_dir() / "single_summary.json").string();
  const std::string config = write_file("single.cfg",
                                        "n_vars = 2\n"
                                        "ground_truth = explicit\n"
                                        "gt_values = 7, 4\n"
                                        "worker_sd = 0\n"
                                        "loss = absolute\n"
                                        "policies = round_robin\n"
                                        "budget = 4\n"
                                        "replicates = 1\n"
                                        "seed = 3\n"
                                        "trace_path = " + trace_path + "\n"
                                        "summary_path = " + summary_path + "\n");
  const CliResult r = run({"simulate", "--config", config});
  REQUIRE(r.code == 0);
  REQUIRE(std::filesystem::exists(trace_path));
  const json summary = json::parse(read_file(summary_path));
  CHECK(summary["policies"]["round_robin"]["trace_path"] == trace_path);
  // Noiseless answers: the final absolute loss is zero.
  CHECK(summary["policies"]["round_robin"]["final_mean"].get<double>() == 0.0);
}

TEST_CASE("simulate propagates config errors as exit 2") {
  const std::string config = write_file("bad.cfg", "n_vars = 0\n");
  const CliResult r = run({"simulate", "--config", config});
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
}
