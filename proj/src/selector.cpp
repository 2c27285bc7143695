#include "crowdest/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "crowdest/interpolator.hpp"
#include "crowdest/rng.hpp"

namespace crowdest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Salts separating the derived random streams of one logical seed.
constexpr std::uint64_t kStepSalt = 0x5e1ec7;
constexpr std::uint64_t kFillSalt = 0xf111;
constexpr std::uint64_t kScoreSalt = 0x5c02e;
constexpr std::uint64_t kRandomSalt = 0xa11ce;

void validate_config(const SelectionConfig& cfg) {
  if (cfg.hypothetical_draws < 1)
    throw std::invalid_argument("SelectionConfig: hypothetical_draws must be >= 1");
  if (cfg.min_samples_before_scoring < 0)
    throw std::invalid_argument("SelectionConfig: min_samples_before_scoring must be >= 0");
  if (cfg.interp_effective_samples < 1)
    throw std::invalid_argument("SelectionConfig: interp_effective_samples must be >= 1");
  if (cfg.fill_draws < 1) throw std::invalid_argument("SelectionConfig: fill_draws must be >= 1");
  if (!(cfg.qp_tol > 0.0)) throw std::invalid_argument("SelectionConfig: qp_tol must be > 0");
}

void validate_inputs(const EstimatorState& state, const std::vector<LossSpec>& specs,
                     const SelectionConfig& cfg) {
  validate_config(cfg);
  if (state.n_vars() == 0) throw std::invalid_argument("state has no variables");
  if (specs.size() != state.n_vars())
    throw std::invalid_argument("loss spec count does not match variable count");
}

// One variable's model row inside a joint scoring pass. For sampled
// variables variance is the answer-level variance around the constrained
// mean and n_eff the sample count; for chain-interpolated variables the
// variance already describes the mean and n_eff is interp_effective_samples.
struct ModelRow {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t n_eff = 1;
  bool present = false;
};

// Reusable buffers for the allocation-free chain refit used in hypothetical
// scoring. The hot loop recomputes the joint model thousands of times per
// selection step, so nothing here may touch the heap after warmup.
struct ChainScratch {
  std::vector<std::size_t> pos;
  std::vector<double> sub_t, sub_w;
  std::vector<double> bval, bw;
  std::vector<std::size_t> bcnt;
  std::vector<double> means;
  std::vector<ModelRow> rows;
};

// Constrained refit from sufficient statistics on a chain plus the closed
// form interpolation fill. Mirrors refit + fill_chain except that filled
// variances use the deterministic approximation instead of Monte Carlo.
void chain_models(const std::vector<VarStats>& stats, std::size_t interp_eff, ChainScratch& ws) {
  const std::size_t n = stats.size();
  ws.pos.clear();
  ws.sub_t.clear();
  ws.sub_w.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (stats[i].count == 0) continue;
    const double variance = stats[i].m2 / static_cast<double>(stats[i].count);
    ws.pos.push_back(i);
    ws.sub_t.push_back(stats[i].mean);
    ws.sub_w.push_back(static_cast<double>(stats[i].count) / std::max(variance, kVarianceFloor));
  }
  if (ws.pos.empty()) throw EmptySamplesError("chain refit: no variable has samples");

  // Weighted non-increasing PAVA over the sampled subsequence.
  ws.bval.clear();
  ws.bw.clear();
  ws.bcnt.clear();
  for (std::size_t k = 0; k < ws.pos.size(); ++k) {
    ws.bval.push_back(ws.sub_t[k]);
    ws.bw.push_back(ws.sub_w[k]);
    ws.bcnt.push_back(1);
    while (ws.bval.size() >= 2) {
      const std::size_t last = ws.bval.size() - 1;
      if (ws.bval[last] <= ws.bval[last - 1]) break;
      const double w = ws.bw[last - 1] + ws.bw[last];
      ws.bval[last - 1] = (ws.bw[last - 1] * ws.bval[last - 1] + ws.bw[last] * ws.bval[last]) / w;
      ws.bw[last - 1] = w;
      ws.bcnt[last - 1] += ws.bcnt[last];
      ws.bval.pop_back();
      ws.bw.pop_back();
      ws.bcnt.pop_back();
    }
  }

  ws.means.assign(n, 0.0);
  std::size_t slot = 0;
  for (std::size_t b = 0; b < ws.bval.size(); ++b)
    for (std::size_t c = 0; c < ws.bcnt[b]; ++c) ws.means[ws.pos[slot++]] = ws.bval[b];

  // Linear completion between sampled neighbors, copies past the ends.
  for (std::size_t i = 0; i < ws.pos.front(); ++i) ws.means[i] = ws.means[ws.pos.front()];
  for (std::size_t i = ws.pos.back() + 1; i < n; ++i) ws.means[i] = ws.means[ws.pos.back()];
  for (std::size_t k = 0; k + 1 < ws.pos.size(); ++k) {
    const std::size_t l = ws.pos[k];
    const std::size_t r = ws.pos[k + 1];
    const double vl = ws.means[l];
    const double vr = ws.means[r];
    for (std::size_t i = l + 1; i < r; ++i) {
      const double t = static_cast<double>(i - l) / static_cast<double>(r - l);
      ws.means[i] = vl + t * (vr - vl);
    }
  }

  ws.rows.assign(n, ModelRow{});
  for (std::size_t k = 0; k < ws.pos.size(); ++k) {
    const std::size_t i = ws.pos[k];
    const double d = stats[i].mean - ws.means[i];
    const double variance = stats[i].m2 / static_cast<double>(stats[i].count) + d * d;
    ws.rows[i] = ModelRow{ws.means[i], variance, stats[i].count, true};
  }

  // Sampling-distribution model of a sampled variable's mean.
  auto model_of = [&](std::size_t j) {
    return NormalParams{ws.means[j], ws.rows[j].variance / static_cast<double>(stats[j].count)};
  };
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (stats[i].count > 0) continue;
    while (next < ws.pos.size() && ws.pos[next] < i) ++next;
    ModelRow row;
    row.present = true;
    row.n_eff = interp_eff;
    row.mean = ws.means[i];
    if (next > 0 && next < ws.pos.size()) {
      const std::size_t l = ws.pos[next - 1];
      const std::size_t r = ws.pos[next];
      ChainSegment seg;
      seg.left_index = static_cast<int>(l) + 1;
      seg.right_index = static_cast<int>(r) + 1;
      seg.k = static_cast<int>(i) + 1;
      seg.left_model = model_of(l);
      seg.right_model = model_of(r);
      row.variance = interpolate_variance_closed(seg);
    } else {
      const std::size_t src = next < ws.pos.size() ? ws.pos[next] : ws.pos.back();
      row.variance = model_of(src).variance;
    }
    ws.rows[i] = row;
  }
}

// General-constraint counterpart; unsampled variables stay absent (no
// interpolation model exists off the chain) and contribute no error.
void general_models(const std::vector<VarStats>& stats, const ConstraintSet& constraints,
                    double qp_tol, ChainScratch& ws) {
  const RefitResult rr = refit_stats(stats, constraints, qp_tol);
  ws.rows.assign(stats.size(), ModelRow{});
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].count == 0) continue;
    ws.rows[i] = ModelRow{rr.means[i], *rr.variances[i], stats[i].count, true};
  }
}

double total_expected_error(const std::vector<ModelRow>& rows, const std::vector<LossSpec>& specs,
                            const IntegrationConfig& integration) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].present) continue;
    total += expected_error(NormalParams{rows[i].mean, rows[i].variance}, rows[i].n_eff, specs[i],
                            integration);
  }
  return total;
}

std::vector<VarStats> stats_of_state(const EstimatorState& state) {
  std::vector<VarStats> stats(state.n_vars());
  for (std::size_t i = 0; i < state.n_vars(); ++i) stats[i] = stats_of(state.variables[i].samples);
  return stats;
}

int pick_fewest_then_lowest(const std::vector<std::size_t>& counts,
                            const std::vector<char>& eligible) {
  int best = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!eligible[i]) continue;
    if (best < 0 || counts[i] < counts[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  }
  return best + 1;
}

}  // namespace

std::vector<double> score_independent(const EstimatorState& state,
                                      const std::vector<LossSpec>& specs,
                                      const SelectionConfig& cfg) {
  validate_inputs(state, specs, cfg);
  const std::size_t n = state.n_vars();
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& samples = state.variables[i].samples;
    if (samples.empty() ||
        samples.size() < static_cast<std::size_t>(cfg.min_samples_before_scoring)) {
      scores[i] = kInf;
      continue;
    }
    scores[i] = expected_error_decrease(samples, specs[i], cfg.integration);
  }
  return scores;
}

std::vector<double> score_constrained(const EstimatorState& state,
                                      const std::vector<LossSpec>& specs,
                                      const SelectionConfig& cfg) {
  validate_inputs(state, specs, cfg);
  const std::size_t n = state.n_vars();
  const bool chain = state.constraints.is_chain();

  std::vector<VarStats> stats = stats_of_state(state);
  ChainScratch ws;
  if (chain) {
    chain_models(stats, cfg.interp_effective_samples, ws);
  } else {
    general_models(stats, state.constraints, cfg.qp_tol, ws);
  }
  const std::vector<ModelRow> base_rows = ws.rows;
  const double base_total = total_expected_error(base_rows, specs, cfg.integration);

  std::vector<double> scores(n, -kInf);
  for (std::size_t i = 0; i < n; ++i) {
    if (!base_rows[i].present) continue;  // off-chain unsampled: not scorable
    const double sd = std::sqrt(base_rows[i].variance);
    std::mt19937_64 engine =
        make_engine(mix_seed(cfg.seed, kScoreSalt, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> unit;
    const VarStats saved = stats[i];
    double acc = 0.0;
    for (int h = 0; h < cfg.hypothetical_draws; ++h) {
      const double x = base_rows[i].mean + sd * unit(engine);
      add_observation(stats[i], x);
      if (chain) {
        chain_models(stats, cfg.interp_effective_samples, ws);
      } else {
        general_models(stats, state.constraints, cfg.qp_tol, ws);
      }
      acc += total_expected_error(ws.rows, specs, cfg.integration);
      stats[i] = saved;
    }
    scores[i] = base_total - acc / static_cast<double>(cfg.hypothetical_draws);
  }
  return scores;
}

int argmax_with_tiebreak(const std::vector<double>& scores,
                         const std::vector<std::size_t>& sample_counts, TieBreak tie_break) {
  if (scores.empty() || scores.size() != sample_counts.size())
    throw std::invalid_argument("argmax_with_tiebreak: size mismatch");
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const std::size_t b = static_cast<std::size_t>(best);
    if (scores[i] > scores[b]) {
      best = static_cast<int>(i);
    } else if (scores[i] == scores[b] &&
               tie_break == TieBreak::fewest_samples_then_lowest_index &&
               sample_counts[i] < sample_counts[b]) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) best = 0;
  return best + 1;
}

int next_question(const EstimatorState& state, const std::vector<LossSpec>& specs,
                  const SelectionConfig& cfg) {
  validate_inputs(state, specs, cfg);
  const std::size_t n = state.n_vars();
  std::vector<std::size_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) counts[i] = state.variables[i].samples.size();

  if (cfg.mode == Mode::round_robin) {
    std::vector<char> all(n, 1);
    return pick_fewest_then_lowest(counts, all);
  }
  if (cfg.mode == Mode::random || cfg.mode == Mode::uniform_random) {
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    std::mt19937_64 engine =
        make_engine(mix_seed(cfg.seed, kRandomSalt, static_cast<std::uint64_t>(total)));
    std::uniform_int_distribution<int> pick(1, static_cast<int>(n));
    return pick(engine);
  }

  // Bootstrap floor first. On constrained chains, unsampled interior
  // variables are exempt (interpolation supplies their model), but anchors
  // and any partially sampled variable must reach the floor: below it the
  // population-variance MLE is degenerate and would hard-pin the refit.
  std::vector<char> below(n, 0);
  bool any_below = false;
  const bool chain_interp = cfg.mode == Mode::constrained && state.constraints.is_chain() && n > 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (chain_interp && i != 0 && i != n - 1 && counts[i] == 0) continue;
    if (counts[i] < static_cast<std::size_t>(cfg.min_samples_before_scoring)) {
      below[i] = 1;
      any_below = true;
    }
  }
  if (any_below) {
    if (cfg.tie_break == TieBreak::lowest_index) {
      for (std::size_t i = 0; i < n; ++i)
        if (below[i]) return static_cast<int>(i) + 1;
    }
    return pick_fewest_then_lowest(counts, below);
  }

  const std::vector<double> scores = cfg.mode == Mode::independent
                                         ? score_independent(state, specs, cfg)
                                         : score_constrained(state, specs, cfg);
  return argmax_with_tiebreak(scores, counts, cfg.tie_break);
}

BudgetResult run_budget(EstimatorState state, const std::vector<LossSpec>& specs,
                        const SelectionConfig& cfg, int budget, const AnswerSource& source,
                        const LossProbe& probe) {
  validate_inputs(state, specs, cfg);
  if (budget < 1) throw std::invalid_argument("run_budget: budget must be >= 1");
  if (!source) throw std::invalid_argument("run_budget: answer source is required");
  const std::size_t n = state.n_vars();
  const bool chain = state.constraints.is_chain();
  const Estimation est = cfg.estimation.value_or(
      cfg.mode == Mode::independent ? Estimation::per_variable : Estimation::constrained);

  SimTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(budget));

  for (int step = 1; step <= budget; ++step) {
    SelectionConfig step_cfg = cfg;
    step_cfg.seed = mix_seed(cfg.seed, kStepSalt, static_cast<std::uint64_t>(step));
    const int variable = next_question(state, specs, step_cfg);

    double answer = 0.0;
    try {
      answer = source(variable, step);
    } catch (const std::exception& e) {
      throw AnswerSourceError(std::string("answer source failed: ") + e.what(), trace);
    }
    if (!std::isfinite(answer))
      throw AnswerSourceError("answer source returned a non-finite value", trace);
    state.add_sample(variable, answer);

    TraceRow row;
    row.step = step;
    row.variable = variable;
    row.answer = answer;

    if (est == Estimation::constrained) {
      state = refit(state, cfg.qp_tol);
      bool any_unsampled = false;
      for (const auto& var : state.variables) any_unsampled = any_unsampled || var.samples.empty();
      if (chain && any_unsampled)
        state = fill_chain(state, cfg.fill_draws,
                           mix_seed(cfg.seed, kFillSalt, static_cast<std::uint64_t>(step)));
      row.prediction = *state.constrained_means;
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool sampled = !state.variables[i].samples.empty();
        if (sampled) {
          err += expected_error(
              NormalParams{row.prediction[i], *state.reestimated_variances[i]},
              state.variables[i].samples.size(), specs[i], cfg.integration);
        } else if (chain) {
          err += expected_error(NormalParams{row.prediction[i], *state.reestimated_variances[i]},
                                cfg.interp_effective_samples, specs[i], cfg.integration);
        }
      }
      row.estimated_error = err;
    } else {
      row.prediction.assign(n, 0.0);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& var = state.variables[i];
        if (!var.fitted) continue;
        row.prediction[i] = var.fitted->mean;
        err += expected_error(*var.fitted, var.samples.size(), specs[i], cfg.integration);
      }
      row.estimated_error = err;
    }

    row.true_loss = probe ? probe(row.prediction) : std::numeric_limits<double>::quiet_NaN();
    trace.rows.push_back(std::move(row));
  }
  return BudgetResult{std::move(state), std::move(trace)};
}

}  // namespace crowdest
