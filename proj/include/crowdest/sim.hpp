#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "crowdest/core.hpp"
#include "crowdest/selector.hpp"

namespace crowdest {

enum class TruthKind { explicit_values, linear_decreasing, logistic, random_monotone };
enum class NoiseKind { normal, student_t3 };

struct GroundTruthParams {
  std::vector<double> values;  // explicit_values only
  double high = 9.0;
  double low = 3.0;
  // Logistic midpoint in 1-based position units; 0 selects the chain center.
  double midpoint = 0.0;
  double steepness = 1.0;
  double worker_sd = 1.0;
  std::vector<double> worker_sd_per_var;  // overrides worker_sd when non-empty
  NoiseKind noise = NoiseKind::normal;
  std::optional<std::pair<double, double>> clamp;
};

// True per-variable means plus the worker noise model.
struct GroundTruth {
  std::vector<double> means;
  std::vector<double> worker_sd;
  NoiseKind noise = NoiseKind::normal;
  std::optional<std::pair<double, double>> clamp;
};

// Builds the truth for constraints.n_vars() variables and verifies it
// satisfies the constraints. linear_decreasing slopes from high to low;
// logistic follows low + (high-low) * sigmoid((midpoint - position) /
// steepness), a cliff shape; random_monotone draws uniforms in [low, high]
// and sorts them descending (seeded).
GroundTruth make_ground_truth(TruthKind kind, const GroundTruthParams& params,
                              const ConstraintSet& constraints, std::uint64_t seed);

// One noisy answer about the 1-based variable. student_t3 noise is scaled
// to unit variance before multiplying by worker_sd.
double worker_answer(const GroundTruth& truth, int variable, std::mt19937_64& engine);

struct ExperimentSummary {
  // True total loss after each step, averaged over replicates, plus the
  // standard error of that mean.
  std::vector<double> mean_true_loss;
  std::vector<double> stderr_true_loss;
  // True total loss after the final step, one entry per replicate.
  std::vector<double> final_true_losses;
  SimTrace first_trace;
};

// Repeats run_budget against fresh noisy answer streams. Replicate r derives
// its own answer and policy seeds from (seed, r), so results are
// deterministic regardless of threads. threads <= 1 runs serially.
ExperimentSummary run_experiment(const GroundTruth& truth, const ConstraintSet& constraints,
                                 const std::vector<LossSpec>& specs, const SelectionConfig& cfg,
                                 int budget, int replicates, std::uint64_t seed, int threads = 1);

}  // namespace crowdest
