#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crowdest/core.hpp"
#include "crowdest/selector.hpp"
#include "crowdest/sim.hpp"

namespace crowdest {

// Malformed or inconsistent input files. line is 1-based, 0 when the
// problem is not tied to one line (for example a missing required key).
struct ConfigError : std::runtime_error {
  ConfigError(std::string file, int line, const std::string& message);
  std::string file;
  int line;
};

// CSV with columns variable,value (header optional): 1-based variable
// labels mapped to their answers in file order.
std::map<int, std::vector<double>> load_samples_csv(const std::string& path);

// CSV of raw coefficient rows, one constraint per line, width = n_vars.
ConstraintSet load_constraints_csv(const std::string& path);

// "chain:<n>" or a path to a constraints CSV.
ConstraintSet parse_constraint_spec(const std::string& spec);

// "threshold:<tau>", "absolute" or "squared".
LossSpec parse_loss_spec(const std::string& text);

Mode parse_mode(const std::string& text);
const char* mode_name(Mode mode);

// Flat key = value experiment description. Unknown keys, duplicate keys,
// type errors and contradictory settings all raise ConfigError with the
// offending line.
struct ExperimentConfig {
  std::size_t n_vars = 0;
  std::string constraints = "chain";  // "chain" or a CSV path
  TruthKind ground_truth = TruthKind::linear_decreasing;
  GroundTruthParams truth_params;
  LossSpec loss;
  std::vector<Mode> policies;
  std::optional<Estimation> estimation;
  int budget = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  SelectionConfig selection;  // mode is overwritten per policy
  int threads = 1;
  std::string trace_path;
  std::string summary_path;
};

ExperimentConfig load_config(const std::string& path);

// step,variable,answer,true_loss,estimated_error,prediction_json rows with
// all floats rendered at 12 significant digits.
void write_trace_csv(std::ostream& os, const SimTrace& trace);

// Shortest %.12g rendering, and the double that rendering parses back to.
// JSON and CSV output both normalize through these so reruns are
// byte-identical.
std::string format_g12(double value);
double round_g12(double value);

}  // namespace crowdest
