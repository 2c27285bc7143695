#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "crowdest/core.hpp"

namespace crowdest {

// Full estimation state for one task: per-variable answers plus the shared
// constraint set and (after refit) the constrained estimates.
//
// reestimated_variances[i] holds the answer-level variance around the
// constrained mean for sampled variables. For variables filled in without
// samples (see fill_chain) it instead holds the uncertainty of the filled
// mean itself, so consumers should treat those rows as a single effective
// observation.
struct EstimatorState {
  std::vector<VariableState> variables;
  ConstraintSet constraints;
  std::optional<std::vector<double>> constrained_means;
  std::vector<std::optional<double>> reestimated_variances;

  static EstimatorState make(std::size_t n_vars, ConstraintSet constraints);

  std::size_t n_vars() const { return variables.size(); }

  // index is 1-based. Appends the answer and refreshes the per-variable fit.
  void add_sample(int index, double value);
};

// Weighted least squares projection: minimize sum_i w_i (v_i - t_i)^2
// subject to constraints.rows() * v <= 0. Unsampled variables enter with
// weight 0 and target 0; they are placeholders the solver must complete.
struct QPProblem {
  std::vector<double> weights;
  std::vector<double> targets;
  ConstraintSet constraints;
};

// Variances below this floor are clamped when forming QP weights.
inline constexpr double kVarianceFloor = 1e-6;

// weight_i = |S_i| / max(sigma_i^2, kVarianceFloor) for sampled variables,
// 0 for unsampled; target_i = sample mean, 0 for unsampled.
QPProblem build_qp(const EstimatorState& state);

// Solves the projection. Chain constraint sets take an exact pool-adjacent-
// violators path; anything else runs dual coordinate ascent. Zero-weight
// coordinates are completed to a feasible value (chain: linear interpolation
// between nearest positive-weight neighbors, copied past the ends; general:
// pulled toward 0 subject to the constraints). The result always satisfies
// check_feasible at kFeasibilityTol.
std::vector<double> solve_qp(const QPProblem& problem, double tol = 1e-9,
                             long max_sweeps = 100000);

// Fills absent coordinates so the full vector satisfies the constraints.
// Chain sets interpolate linearly between the nearest known neighbors and
// copy the nearest known value beyond the ends; the known values must
// already be non-increasing. General sets solve a small projection that
// keeps unknowns near 0. Throws InfeasibleError when the known coordinates
// admit no feasible completion.
std::vector<double> complete_zero_weight(const std::vector<std::optional<double>>& partial,
                                         const ConstraintSet& constraints);

// Answer-level variance around the constrained mean:
//   (1/|S_i|) * sum_s (s - v_i)^2,
// absent for unsampled variables. Never below the matching per-variable fit
// variance (they are equal exactly when v_i is the sample mean).
std::vector<std::optional<double>> reestimate_variances(const EstimatorState& state,
                                                        const std::vector<double>& v);

// build_qp + solve_qp + reestimate_variances, returning a new state with
// constrained_means and reestimated_variances set. Throws EmptySamplesError
// when no variable has samples.
EstimatorState refit(const EstimatorState& state, double tol = 1e-9);

// --- solver internals, exposed for direct testing and fast callers ---

// Weighted non-increasing isotonic regression by pool-adjacent-violators.
std::vector<double> isotonic_decreasing_fit(const std::vector<double>& targets,
                                            const std::vector<double>& weights);

// Hildreth dual coordinate ascent for
//   minimize sum_i w_i (v_i - t_i)^2  s.t.  rows * v <= rhs,
// all weights strictly positive. Stops when the largest constraint violation
// and the complementarity gap both fall to tol; throws NonConvergenceError
// (carrying the best iterate) at the sweep cap.
std::vector<double> hildreth_solve(const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>& rhs,
                                   const std::vector<double>& weights,
                                   const std::vector<double>& targets, double tol,
                                   long max_sweeps);

// Sufficient statistics of one variable's answers: m2 is the centered sum
// of squares, so mean/variance reconstruct as (mean, m2 / count).
struct VarStats {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
};

VarStats stats_of(const std::vector<double>& samples);
void add_observation(VarStats& stats, double x);

struct RefitResult {
  std::vector<double> means;
  std::vector<std::optional<double>> variances;
};

// refit computed from sufficient statistics only. Used by selection scoring
// where hypothetical answers are appended thousands of times; agrees with
// refit on the same data.
RefitResult refit_stats(const std::vector<VarStats>& stats, const ConstraintSet& constraints,
                        double tol = 1e-9);

}  // namespace crowdest
