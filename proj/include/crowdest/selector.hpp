#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crowdest/constrained.hpp"
#include "crowdest/core.hpp"
#include "crowdest/estimator.hpp"

namespace crowdest {

// Question-selection policy. independent and constrained score candidates
// by expected error decrease (per-variable vs. joint constrained model);
// round_robin and random are baselines. uniform_random is accepted as an
// alias of random.
enum class Mode { independent, constrained, round_robin, random, uniform_random };

// How predictions are formed after each answer. Defaults to per_variable
// for independent mode and constrained otherwise.
enum class Estimation { per_variable, constrained };

enum class TieBreak { fewest_samples_then_lowest_index, lowest_index };

struct SelectionConfig {
  Mode mode = Mode::independent;
  // Hypothetical answers drawn per candidate when scoring jointly.
  int hypothetical_draws = 16;
  // Bootstrap floor: scoring waits until every floored variable has this
  // many answers. On constrained chains that is the anchors plus any
  // partially sampled variable (unsampled interior positions are modeled by
  // interpolation instead); in other modes, every variable.
  int min_samples_before_scoring = 2;
  std::uint64_t seed = 0;
  TieBreak tie_break = TieBreak::fewest_samples_then_lowest_index;
  IntegrationConfig integration;
  std::optional<Estimation> estimation;
  // Effective sample count charged to interpolated (unsampled) variables
  // when summing expected error; their variance already describes the mean.
  std::size_t interp_effective_samples = 1;
  // Monte Carlo draws for chain fills of the real state (not scoring).
  long fill_draws = 512;
  double qp_tol = 1e-9;
};

// Expected error decrease per variable under independent per-variable
// models. Variables below the scoring floor (or without any samples) score
// +infinity so they are acquired first.
std::vector<double> score_independent(const EstimatorState& state,
                                      const std::vector<LossSpec>& specs,
                                      const SelectionConfig& cfg);

// Expected decrease of the summed expected error of the joint constrained
// model: for each candidate, hypothetical answers are drawn from its
// current model, the constrained refit is recomputed, and the new total is
// averaged. Unsampled candidates are scorable only on chains (interpolation
// provides their model); elsewhere they score -infinity.
std::vector<double> score_constrained(const EstimatorState& state,
                                      const std::vector<LossSpec>& specs,
                                      const SelectionConfig& cfg);

// The 1-based variable to ask about next: bootstrap until the floor is met,
// then argmax of the mode's scores. Baseline modes pick by their own rule
// (round_robin: fewest answers, then lowest index; random: seeded uniform).
int next_question(const EstimatorState& state, const std::vector<LossSpec>& specs,
                  const SelectionConfig& cfg);

// Highest score wins; ties prefer fewer samples then the lower index
// (or just the lower index, per tie_break). Returns a 1-based index.
int argmax_with_tiebreak(const std::vector<double>& scores,
                         const std::vector<std::size_t>& sample_counts, TieBreak tie_break);

struct TraceRow {
  int step = 0;      // 1-based
  int variable = 0;  // 1-based
  double answer = 0.0;
  double true_loss = 0.0;  // NaN when no loss probe was supplied
  double estimated_error = 0.0;
  std::vector<double> prediction;
};

struct SimTrace {
  std::vector<TraceRow> rows;
};

// Supplies the answer to one question; called once per step with the
// 1-based variable and step.
using AnswerSource = std::function<double(int variable, int step)>;

// Optional observer mapping the current prediction vector to a true loss.
using LossProbe = std::function<double(const std::vector<double>& prediction)>;

// Raised when the answer source throws or returns a non-finite value.
// Carries the trace of the steps that completed.
struct AnswerSourceError : std::runtime_error {
  AnswerSourceError(const std::string& what, SimTrace partial)
      : std::runtime_error(what), partial_trace(std::move(partial)) {}
  SimTrace partial_trace;
};

struct BudgetResult {
  EstimatorState state;
  SimTrace trace;
};

// Runs `budget` ask-update cycles from the given state: pick a variable,
// obtain an answer, update the estimates, record a trace row. Deterministic
// given cfg.seed and a deterministic answer source.
BudgetResult run_budget(EstimatorState state, const std::vector<LossSpec>& specs,
                        const SelectionConfig& cfg, int budget, const AnswerSource& source,
                        const LossProbe& probe = nullptr);

}  // namespace crowdest
