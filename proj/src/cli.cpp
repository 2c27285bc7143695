#include "crowdest/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "crowdest/constrained.hpp"
#include "crowdest/formats.hpp"
#include "crowdest/interpolator.hpp"
#include "crowdest/rng.hpp"
#include "crowdest/selector.hpp"
#include "crowdest/sim.hpp"

namespace crowdest {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTruthSeedSalt = 0x617;
constexpr std::uint64_t kPolicySeedSalt = 0x2001;

json json_number(double value) {
  if (!std::isfinite(value)) {
    if (std::isnan(value)) return "nan";
    return value > 0 ? "inf" : "-inf";
  }
  return round_g12(value);
}

json json_numbers(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(json_number(v));
  return arr;
}

EstimatorState state_from_files(const std::string& samples_path,
                                const std::string& constraints_spec) {
  const ConstraintSet constraints = parse_constraint_spec(constraints_spec);
  const std::map<int, std::vector<double>> samples = load_samples_csv(samples_path);
  EstimatorState state = EstimatorState::make(constraints.n_vars(), constraints);
  for (const auto& [variable, values] : samples) {
    if (static_cast<std::size_t>(variable) > constraints.n_vars())
      throw ConfigError(samples_path, 0,
                        "variable " + std::to_string(variable) + " exceeds n_vars " +
                            std::to_string(constraints.n_vars()));
    for (double v : values) state.add_sample(variable, v);
  }
  return state;
}

// trace.csv -> trace.<policy>.csv; extension-free paths get the suffix
// appended. Only used when several policies share one config.
std::string policy_trace_path(const std::string& base, const std::string& policy) {
  const std::size_t slash = base.find_last_of('/');
  const std::size_t dot = base.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + "." + policy;
  return base.substr(0, dot) + "." + policy + base.substr(dot);
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path, 0, "cannot open file for writing");
  out << content;
  if (!out) throw ConfigError(path, 0, "failed to write file");
}

int cmd_estimate(const std::string& samples_path, const std::string& constraints_spec,
                 double qp_tol, long fill_draws, std::uint64_t seed, std::ostream& out) {
  EstimatorState state = state_from_files(samples_path, constraints_spec);
  state = refit(state, qp_tol);
  bool any_unsampled = false;
  for (const auto& var : state.variables) any_unsampled = any_unsampled || var.samples.empty();
  if (state.constraints.is_chain() && any_unsampled)
    state = fill_chain(state, fill_draws, seed);

  json vars = json::array();
  for (std::size_t i = 0; i < state.n_vars(); ++i) {
    const auto& var = state.variables[i];
    json row;
    row["index"] = var.index;
    row["count"] = var.samples.size();
    if (var.fitted) {
      row["sample_mean"] = json_number(var.fitted->mean);
      row["sample_variance"] = json_number(var.fitted->variance);
    } else {
      row["sample_mean"] = nullptr;
      row["sample_variance"] = nullptr;
    }
    row["constrained_mean"] = json_number((*state.constrained_means)[i]);
    row["variance"] = state.reestimated_variances[i]
                          ? json_number(*state.reestimated_variances[i])
                          : json(nullptr);
    vars.push_back(row);
  }
  json doc;
  doc["n_vars"] = state.n_vars();
  doc["feasible"] = check_feasible(state.constraints, *state.constrained_means, kFeasibilityTol);
  doc["means"] = json_numbers(*state.constrained_means);
  doc["variables"] = vars;
  out << doc.dump(2) << "\n";
  return 0;
}

int cmd_next(const std::string& samples_path, const std::string& constraints_spec,
             const std::string& loss_text, const std::string& mode_text, int hypothetical_draws,
             int min_samples, std::uint64_t seed, std::ostream& out) {
  EstimatorState state = state_from_files(samples_path, constraints_spec);
  const LossSpec loss = parse_loss_spec(loss_text);
  const std::vector<LossSpec> specs(state.n_vars(), loss);

  SelectionConfig cfg;
  cfg.mode = parse_mode(mode_text);
  cfg.hypothetical_draws = hypothetical_draws;
  cfg.min_samples_before_scoring = min_samples;
  cfg.seed = seed;

  const int variable = next_question(state, specs, cfg);
  json doc;
  doc["variable"] = variable;
  doc["mode"] = mode_name(cfg.mode);
  if (cfg.mode == Mode::independent) {
    doc["scores"] = json_numbers(score_independent(state, specs, cfg));
  } else if (cfg.mode == Mode::constrained) {
    bool bootstrapping = false;
    const bool chain_interp = state.constraints.is_chain() && state.n_vars() > 1;
    for (std::size_t i = 0; i < state.n_vars(); ++i) {
      const std::size_t count = state.variables[i].samples.size();
      if (chain_interp && i != 0 && i + 1 != state.n_vars() && count == 0) continue;
      bootstrapping = bootstrapping || count < static_cast<std::size_t>(min_samples);
    }
    // Scores are only meaningful once the bootstrap floor is met.
    doc["scores"] = bootstrapping ? json(nullptr)
                                  : json_numbers(score_constrained(state, specs, cfg));
  } else {
    doc["scores"] = nullptr;
  }
  out << doc.dump(2) << "\n";
  return 0;
}

int cmd_interpolate(const std::string& models_path, int k, long draws, std::uint64_t seed,
                    std::ostream& out) {
  const std::vector<std::string> lines = [&] {
    std::ifstream in(models_path);
    if (!in) throw ConfigError(models_path, 0, "cannot open file");
    std::vector<std::string> ls;
    std::string line;
    while (std::getline(in, line)) ls.push_back(line);
    return ls;
  }();

  struct Row {
    int index;
    NormalParams model;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("index,", 0) == 0) continue;  // header
    const int line_no = static_cast<int>(i) + 1;
    int index = 0;
    double mean = 0.0;
    double variance = 0.0;
    char extra = '\0';
    if (std::sscanf(line.c_str(), "%d,%lf,%lf%c", &index, &mean, &variance, &extra) != 3)
      throw ConfigError(models_path, line_no, "expected rows of index,mean,variance");
    rows.push_back(Row{index, NormalParams{mean, variance}});
  }
  if (rows.size() != 2)
    throw ConfigError(models_path, 0, "expected exactly two endpoint model rows");
  if (rows[0].index > rows[1].index) std::swap(rows[0], rows[1]);

  ChainSegment seg;
  seg.left_index = rows[0].index;
  seg.right_index = rows[1].index;
  seg.k = k;
  seg.left_model = rows[0].model;
  seg.right_model = rows[1].model;

  json doc;
  doc["left_index"] = seg.left_index;
  doc["right_index"] = seg.right_index;
  doc["k"] = seg.k;
  doc["mean"] = json_number(interpolate_mean(seg));
  doc["variance"] = json_number(interpolate_variance(seg, draws, seed));
  doc["variance_closed"] = json_number(interpolate_variance_closed(seg));
  doc["draws"] = draws;
  out << doc.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, bool seed_overridden,
                 std::uint64_t seed_override, std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  if (seed_overridden) {
    config.seed = seed_override;
    config.selection.seed = seed_override;
  }

  ConstraintSet constraints = config.constraints == "chain"
                                  ? ConstraintSet::chain(config.n_vars)
                                  : load_constraints_csv(config.constraints);
  if (constraints.n_vars() != config.n_vars)
    throw ConfigError(config.constraints, 0, "constraint width does not match n_vars");

  const GroundTruth truth = make_ground_truth(config.ground_truth, config.truth_params,
                                              constraints, mix_seed(config.seed, kTruthSeedSalt));
  const std::vector<LossSpec> specs(config.n_vars, config.loss);

  json summary;
  summary["n_vars"] = config.n_vars;
  summary["budget"] = config.budget;
  summary["replicates"] = config.replicates;
  summary["seed"] = config.seed;
  summary["ground_truth_means"] = json_numbers(truth.means);
  summary["policies"] = json::object();

  for (std::size_t p = 0; p < config.policies.size(); ++p) {
    const Mode mode = config.policies[p];
    const std::string name = mode_name(mode);
    SelectionConfig cfg = config.selection;
    cfg.mode = mode;
    const ExperimentSummary result = run_experiment(
        truth, constraints, specs, cfg, config.budget, config.replicates,
        mix_seed(config.seed, kPolicySeedSalt, static_cast<std::uint64_t>(p)), config.threads);

    const std::string trace_path = config.policies.size() == 1
                                       ? config.trace_path
                                       : policy_trace_path(config.trace_path, name);
    std::ostringstream trace;
    write_trace_csv(trace, result.first_trace);
    write_file(trace_path, trace.str());

    double final_mean = 0.0;
    for (double loss : result.final_true_losses) final_mean += loss;
    final_mean /= static_cast<double>(result.final_true_losses.size());
    double ss = 0.0;
    for (double loss : result.final_true_losses) {
      const double d = loss - final_mean;
      ss += d * d;
    }
    const double final_stderr =
        result.final_true_losses.size() > 1
            ? std::sqrt(ss / (static_cast<double>(result.final_true_losses.size()) - 1.0)) /
                  std::sqrt(static_cast<double>(result.final_true_losses.size()))
            : 0.0;

    json entry;
    entry["mean_true_loss"] = json_numbers(result.mean_true_loss);
    entry["stderr_true_loss"] = json_numbers(result.stderr_true_loss);
    entry["final_true_losses"] = json_numbers(result.final_true_losses);
    entry["final_mean"] = json_number(final_mean);
    entry["final_stderr"] = json_number(final_stderr);
    entry["trace_path"] = trace_path;
    summary["policies"][name] = entry;

    out << "policy " << name << ": final_mean=" << format_g12(round_g12(final_mean))
        << " final_stderr=" << format_g12(round_g12(final_stderr)) << " trace=" << trace_path
        << "\n";
  }

  write_file(config.summary_path, summary.dump(2) + "\n");
  out << "summary " << config.summary_path << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crowd answer collection and estimation toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides config seed)");

  auto* simulate = app.add_subcommand("simulate", "Run a simulated experiment from a config file");
  simulate->fallthrough();
  std::string config_path;
  simulate->add_option("--config", config_path, "Experiment config file")->required();

  auto* estimate = app.add_subcommand("estimate", "Constrained estimates from collected answers");
  estimate->fallthrough();
  std::string samples_path, constraints_spec;
  double qp_tol = 1e-9;
  long fill_draws = 512;
  estimate->add_option("--samples", samples_path, "CSV of variable,value answers")->required();
  estimate->add_option("--constraints", constraints_spec, "chain:<n> or a constraints CSV path")
      ->required();
  estimate->add_option("--qp-tol", qp_tol, "Solver tolerance");
  estimate->add_option("--fill-draws", fill_draws, "Monte Carlo draws for chain fills");

  auto* next = app.add_subcommand("next", "Pick the next variable to ask about");
  next->fallthrough();
  std::string loss_text, mode_text = "constrained";
  int hypothetical_draws = 16;
  int min_samples = 2;
  next->add_option("--samples", samples_path, "CSV of variable,value answers")->required();
  next->add_option("--constraints", constraints_spec, "chain:<n> or a constraints CSV path")
      ->required();
  next->add_option("--loss", loss_text, "threshold:<tau>, absolute or squared")->required();
  next->add_option("--mode", mode_text, "Selection mode");
  next->add_option("--hypothetical-draws", hypothetical_draws, "Hypothetical answers per candidate");
  next->add_option("--min-samples", min_samples, "Bootstrap floor before scoring");

  auto* interpolate = app.add_subcommand("interpolate", "Interpolate between two endpoint models");
  interpolate->fallthrough();
  std::string models_path;
  int k = 0;
  long draws = 10000;
  interpolate->add_option("--models", models_path, "CSV of index,mean,variance with two rows")
      ->required();
  interpolate->add_option("--k", k, "Target 1-based position between the endpoints")->required();
  interpolate->add_option("--draws", draws, "Monte Carlo draws");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed())
      return cmd_simulate(config_path, seed_opt->count() > 0, seed, out);
    if (estimate->parsed())
      return cmd_estimate(samples_path, constraints_spec, qp_tol, fill_draws, seed, out);
    if (next->parsed())
      return cmd_next(samples_path, constraints_spec, loss_text, mode_text, hypothetical_draws,
                      min_samples, seed, out);
    if (interpolate->parsed()) return cmd_interpolate(models_path, k, draws, seed, out);
    err << "no subcommand given\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace crowdest
