#include "crowdest/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowdest/estimator.hpp"

namespace crowdest {

EstimatorState EstimatorState::make(std::size_t n_vars, ConstraintSet constraints) {
  if (n_vars == 0) throw std::invalid_argument("EstimatorState: n_vars must be >= 1");
  if (constraints.n_vars() != n_vars)
    throw std::invalid_argument("EstimatorState: constraint width does not match n_vars");
  EstimatorState state;
  state.variables.resize(n_vars);
  for (std::size_t i = 0; i < n_vars; ++i) state.variables[i].index = static_cast<int>(i) + 1;
  state.constraints = std::move(constraints);
  state.reestimated_variances.assign(n_vars, std::nullopt);
  return state;
}

void EstimatorState::add_sample(int index, double value) {
  if (index < 1 || static_cast<std::size_t>(index) > variables.size())
    throw std::invalid_argument("add_sample: index out of range");
  if (!std::isfinite(value)) throw std::invalid_argument("add_sample: value must be finite");
  auto& var = variables[static_cast<std::size_t>(index) - 1];
  var.samples.push_back(value);
  var.fitted = fit_mle(var.samples);
}

QPProblem build_qp(const EstimatorState& state) {
  const std::size_t n = state.n_vars();
  QPProblem p;
  p.weights.assign(n, 0.0);
  p.targets.assign(n, 0.0);
  p.constraints = state.constraints;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& var = state.variables[i];
    if (var.samples.empty()) continue;
    const NormalParams fit = var.fitted ? *var.fitted : fit_mle(var.samples);
    p.weights[i] = static_cast<double>(var.samples.size()) / std::max(fit.variance, kVarianceFloor);
    p.targets[i] = fit.mean;
  }
  return p;
}

std::vector<double> isotonic_decreasing_fit(const std::vector<double>& targets,
                                            const std::vector<double>& weights) {
  if (targets.size() != weights.size())
    throw std::invalid_argument("isotonic_decreasing_fit: size mismatch");
  struct Block {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw std::invalid_argument("isotonic_decreasing_fit: weights must be positive");
    blocks.push_back({targets[i], weights[i], 1});
    // Non-increasing fit: pool while the new block rises above its left
    // neighbor.
    while (blocks.size() >= 2) {
      const Block& prev = blocks[blocks.size() - 2];
      const Block& last = blocks.back();
      if (last.value <= prev.value) break;
      const double w = prev.weight + last.weight;
      const Block merged{(prev.weight * prev.value + last.weight * last.value) / w, w,
                         prev.count + last.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(targets.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

std::vector<double> hildreth_solve(const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>& rhs,
                                   const std::vector<double>& weights,
                                   const std::vector<double>& targets, double tol,
                                   long max_sweeps) {
  const std::size_t n = targets.size();
  const std::size_t m = rows.size();
  if (weights.size() != n) throw std::invalid_argument("hildreth_solve: size mismatch");
  if (rhs.size() != m) throw std::invalid_argument("hildreth_solve: rhs size mismatch");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("hildreth_solve: weights must be positive");
  for (const auto& row : rows)
    if (row.size() != n) throw std::invalid_argument("hildreth_solve: row width mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("hildreth_solve: tol must be positive");

  // Sparse view of each row plus the dual diagonal M_rr = a_r W^-1 a_r^T.
  // Zero rows impose 0 <= rhs_r: verified once and dropped.
  struct SparseRow {
    std::vector<std::size_t> idx;
    std::vector<double> coef;
    double rhs;
    double diag;
  };
  std::vector<SparseRow> sys;
  sys.reserve(m);
  for (std::size_t r = 0; r < m; ++r) {
    SparseRow sr;
    sr.rhs = rhs[r];
    sr.diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (rows[r][j] == 0.0) continue;
      sr.idx.push_back(j);
      sr.coef.push_back(rows[r][j]);
      sr.diag += rows[r][j] * rows[r][j] / weights[j];
    }
    if (sr.idx.empty()) {
      if (rhs[r] < -kFeasibilityTol)
        throw InfeasibleError("hildreth_solve: zero row with negative bound");
      continue;
    }
    sys.push_back(std::move(sr));
  }

  std::vector<double> v = targets;
  if (sys.empty()) return v;
  std::vector<double> lambda(sys.size(), 0.0);

  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t r = 0; r < sys.size(); ++r) {
      const SparseRow& sr = sys[r];
      double res = -sr.rhs;
      for (std::size_t k = 0; k < sr.idx.size(); ++k) res += sr.coef[k] * v[sr.idx[k]];
      const double next = std::max(0.0, lambda[r] + 2.0 * res / sr.diag);
      const double delta = next - lambda[r];
      if (delta == 0.0) continue;
      lambda[r] = next;
      for (std::size_t k = 0; k < sr.idx.size(); ++k)
        v[sr.idx[k]] -= delta * sr.coef[k] / (2.0 * weights[sr.idx[k]]);
    }

    double violation = 0.0;
    double gap = 0.0;
    for (std::size_t r = 0; r < sys.size(); ++r) {
      const SparseRow& sr = sys[r];
      double lhs = -sr.rhs;
      for (std::size_t k = 0; k < sr.idx.size(); ++k) lhs += sr.coef[k] * v[sr.idx[k]];
      violation = std::max(violation, lhs);
      gap += lambda[r] * (-lhs);
    }
    if (violation <= tol && std::abs(gap) <= tol) return v;
  }
  throw NonConvergenceError("hildreth_solve: sweep cap reached", std::move(v));
}

namespace {

// Chain completion: knowns must be non-increasing; gaps fill linearly and
// the ends copy the nearest known value.
std::vector<double> complete_chain(const std::vector<std::optional<double>>& partial) {
  const std::size_t n = partial.size();
  std::vector<std::size_t> known;
  for (std::size_t i = 0; i < n; ++i)
    if (partial[i]) known.push_back(i);
  if (known.empty())
    throw std::invalid_argument("complete_zero_weight: no known coordinates");
  for (std::size_t k = 0; k + 1 < known.size(); ++k) {
    if (*partial[known[k + 1]] > *partial[known[k]] + kFeasibilityTol)
      throw InfeasibleError("complete_zero_weight: known values violate the chain order");
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < known.front(); ++i) out[i] = *partial[known.front()];
  for (std::size_t i = known.back() + 1; i < n; ++i) out[i] = *partial[known.back()];
  for (std::size_t k = 0; k + 1 < known.size(); ++k) {
    const std::size_t l = known[k];
    const std::size_t r = known[k + 1];
    const double vl = *partial[l];
    const double vr = *partial[r];
    out[l] = vl;
    out[r] = vr;
    for (std::size_t i = l + 1; i < r; ++i) {
      const double t = static_cast<double>(i - l) / static_cast<double>(r - l);
      out[i] = vl + t * (vr - vl);
    }
  }
  if (known.size() == 1) out[known.front()] = *partial[known.front()];
  return out;
}

// General completion: solve for the unknown coordinates only, pulling them
// toward 0, with the known part folded into the right-hand side.
std::vector<double> complete_general(const std::vector<std::optional<double>>& partial,
                                     const ConstraintSet& constraints) {
  const std::size_t n = partial.size();
  std::vector<std::size_t> free_of;
  std::vector<std::size_t> free_idx(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!partial[i]) {
      free_idx[i] = free_of.size();
      free_of.push_back(i);
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (partial[i]) out[i] = *partial[i];
  if (free_of.empty()) {
    if (!check_feasible(constraints, out, kFeasibilityTol))
      throw InfeasibleError("complete_zero_weight: known values are infeasible");
    return out;
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (const auto& row : constraints.rows()) {
    std::vector<double> reduced(free_of.size(), 0.0);
    double bound = 0.0;
    bool any_free = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] == 0.0) continue;
      if (partial[j]) {
        bound -= row[j] * *partial[j];
      } else {
        reduced[free_idx[j]] = row[j];
        any_free = true;
      }
    }
    if (!any_free) {
      if (bound < -kFeasibilityTol)
        throw InfeasibleError("complete_zero_weight: known values are infeasible");
      continue;
    }
    rows.push_back(std::move(reduced));
    rhs.push_back(bound);
  }

  std::vector<double> weights(free_of.size(), 1.0);
  std::vector<double> targets(free_of.size(), 0.0);
  std::vector<double> filled;
  try {
    filled = hildreth_solve(rows, rhs, weights, targets, 1e-12, 100000);
  } catch (const NonConvergenceError& e) {
    // The final feasibility check below decides whether the best iterate
    // is acceptable or the system has no completion.
    filled = e.best_iterate;
  }
  for (std::size_t k = 0; k < free_of.size(); ++k) out[free_of[k]] = filled[k];
  if (!check_feasible(constraints, out, kFeasibilityTol))
    throw InfeasibleError("complete_zero_weight: completion violates constraints");
  return out;
}

}  // namespace

std::vector<double> complete_zero_weight(const std::vector<std::optional<double>>& partial,
                                         const ConstraintSet& constraints) {
  if (partial.size() != constraints.n_vars())
    throw std::invalid_argument("complete_zero_weight: size mismatch");
  for (const auto& p : partial)
    if (p && !std::isfinite(*p))
      throw std::invalid_argument("complete_zero_weight: known values must be finite");
  if (constraints.is_chain()) return complete_chain(partial);
  if (constraints.rows().empty()) {
    std::vector<double> out(partial.size(), 0.0);
    for (std::size_t i = 0; i < partial.size(); ++i)
      if (partial[i]) out[i] = *partial[i];
    return out;
  }
  return complete_general(partial, constraints);
}

std::vector<double> solve_qp(const QPProblem& problem, double tol, long max_sweeps) {
  const std::size_t n = problem.targets.size();
  if (problem.weights.size() != n) throw std::invalid_argument("solve_qp: size mismatch");
  if (problem.constraints.n_vars() != n)
    throw std::invalid_argument("solve_qp: constraint width mismatch");
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (problem.weights[i] < 0.0) throw std::invalid_argument("solve_qp: negative weight");
    if (!std::isfinite(problem.targets[i]) || !std::isfinite(problem.weights[i]))
      throw std::invalid_argument("solve_qp: non-finite problem data");
    if (problem.weights[i] > 0.0) any_positive = true;
  }
  if (!any_positive) throw std::invalid_argument("solve_qp: all weights are zero");

  if (problem.constraints.is_chain()) {
    std::vector<double> sub_t, sub_w;
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) {
      if (problem.weights[i] > 0.0) {
        pos.push_back(i);
        sub_t.push_back(problem.targets[i]);
        sub_w.push_back(problem.weights[i]);
      }
    }
    // The optimum over the positive-weight coordinates is their isotonic
    // fit; zero-weight coordinates are free and only need feasibility.
    const std::vector<double> fitted = isotonic_decreasing_fit(sub_t, sub_w);
    std::vector<std::optional<double>> partial(n, std::nullopt);
    for (std::size_t k = 0; k < pos.size(); ++k) partial[pos[k]] = fitted[k];
    return complete_zero_weight(partial, problem.constraints);
  }

  const double free_weight = 1e-8;
  std::vector<double> weights = problem.weights;
  std::vector<double> targets = problem.targets;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      weights[i] = free_weight;
      targets[i] = 0.0;
    }
  }
  std::vector<double> rhs(problem.constraints.rows().size(), 0.0);
  std::vector<double> v =
      hildreth_solve(problem.constraints.rows(), rhs, weights, targets, tol, max_sweeps);
  if (!check_feasible(problem.constraints, v, std::max(kFeasibilityTol, 10.0 * tol)))
    throw NonConvergenceError("solve_qp: result violates constraints", std::move(v));
  return v;
}

std::vector<std::optional<double>> reestimate_variances(const EstimatorState& state,
                                                        const std::vector<double>& v) {
  const std::size_t n = state.n_vars();
  if (v.size() != n) throw std::invalid_argument("reestimate_variances: size mismatch");
  std::vector<std::optional<double>> out(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& samples = state.variables[i].samples;
    if (samples.empty()) continue;
    if (!std::isfinite(v[i]))
      throw std::invalid_argument("reestimate_variances: v must be finite");
    double ss = 0.0;
    for (double s : samples) {
      const double d = s - v[i];
      ss += d * d;
    }
    out[i] = ss / static_cast<double>(samples.size());
  }
  return out;
}

EstimatorState refit(const EstimatorState& state, double tol) {
  bool any = false;
  for (const auto& var : state.variables) any = any || !var.samples.empty();
  if (!any) throw EmptySamplesError("refit: no variable has samples");
  EstimatorState out = state;
  const QPProblem p = build_qp(state);
  std::vector<double> v = solve_qp(p, tol);
  out.reestimated_variances = reestimate_variances(state, v);
  out.constrained_means = std::move(v);
  return out;
}

VarStats stats_of(const std::vector<double>& samples) {
  VarStats s;
  for (double x : samples) add_observation(s, x);
  return s;
}

void add_observation(VarStats& stats, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("add_observation: value must be finite");
  stats.count += 1;
  const double d = x - stats.mean;
  stats.mean += d / static_cast<double>(stats.count);
  stats.m2 += d * (x - stats.mean);
}

RefitResult refit_stats(const std::vector<VarStats>& stats, const ConstraintSet& constraints,
                        double tol) {
  const std::size_t n = stats.size();
  if (constraints.n_vars() != n) throw std::invalid_argument("refit_stats: size mismatch");
  QPProblem p;
  p.weights.assign(n, 0.0);
  p.targets.assign(n, 0.0);
  p.constraints = constraints;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (stats[i].count == 0) continue;
    any = true;
    const double variance = stats[i].m2 / static_cast<double>(stats[i].count);
    p.weights[i] = static_cast<double>(stats[i].count) / std::max(variance, kVarianceFloor);
    p.targets[i] = stats[i].mean;
  }
  if (!any) throw EmptySamplesError("refit_stats: no variable has samples");
  RefitResult out;
  out.means = solve_qp(p, tol);
  out.variances.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    if (stats[i].count == 0) continue;
    const double d = stats[i].mean - out.means[i];
    out.variances[i] = stats[i].m2 / static_cast<double>(stats[i].count) + d * d;
  }
  return out;
}

}  // namespace crowdest
