#include "crowdest/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>

#include "crowdest/rng.hpp"

namespace crowdest {

namespace {

constexpr std::uint64_t kTruthSalt = 0x7271;
constexpr std::uint64_t kAnswerSalt = 0xa2577;
constexpr std::uint64_t kPolicySalt = 0x9019;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

GroundTruth make_ground_truth(TruthKind kind, const GroundTruthParams& params,
                              const ConstraintSet& constraints, std::uint64_t seed) {
  const std::size_t n = constraints.n_vars();
  GroundTruth truth;
  truth.noise = params.noise;
  truth.clamp = params.clamp;

  switch (kind) {
    case TruthKind::explicit_values: {
      if (params.values.size() != n)
        throw std::invalid_argument("make_ground_truth: need one value per variable");
      truth.means = params.values;
      break;
    }
    case TruthKind::linear_decreasing: {
      truth.means.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        truth.means[i] = params.high + t * (params.low - params.high);
      }
      break;
    }
    case TruthKind::logistic: {
      if (!(params.steepness > 0.0))
        throw std::invalid_argument("make_ground_truth: steepness must be > 0");
      const double mid =
          params.midpoint != 0.0 ? params.midpoint : (static_cast<double>(n) + 1.0) / 2.0;
      truth.means.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double position = static_cast<double>(i) + 1.0;
        truth.means[i] =
            params.low + (params.high - params.low) * sigmoid((mid - position) / params.steepness);
      }
      break;
    }
    case TruthKind::random_monotone: {
      if (!(params.high >= params.low))
        throw std::invalid_argument("make_ground_truth: need high >= low");
      std::mt19937_64 engine = make_engine(mix_seed(seed, kTruthSalt));
      std::uniform_real_distribution<double> pick(params.low, params.high);
      truth.means.resize(n);
      for (std::size_t i = 0; i < n; ++i) truth.means[i] = pick(engine);
      std::sort(truth.means.begin(), truth.means.end(), std::greater<double>());
      break;
    }
  }

  for (double m : truth.means)
    if (!std::isfinite(m)) throw std::invalid_argument("make_ground_truth: non-finite mean");

  if (!params.worker_sd_per_var.empty()) {
    if (params.worker_sd_per_var.size() != n)
      throw std::invalid_argument("make_ground_truth: worker_sd_per_var size mismatch");
    truth.worker_sd = params.worker_sd_per_var;
  } else {
    truth.worker_sd.assign(n, params.worker_sd);
  }
  for (double sd : truth.worker_sd)
    if (!std::isfinite(sd) || sd < 0.0)
      throw std::invalid_argument("make_ground_truth: worker_sd must be >= 0");

  if (truth.clamp && !(truth.clamp->first < truth.clamp->second))
    throw std::invalid_argument("make_ground_truth: clamp bounds out of order");

  if (!check_feasible(constraints, truth.means, kFeasibilityTol))
    throw std::invalid_argument("make_ground_truth: means violate the constraints");
  return truth;
}

double worker_answer(const GroundTruth& truth, int variable, std::mt19937_64& engine) {
  if (variable < 1 || static_cast<std::size_t>(variable) > truth.means.size())
    throw std::invalid_argument("worker_answer: variable out of range");
  const std::size_t i = static_cast<std::size_t>(variable) - 1;
  double noise = 0.0;
  switch (truth.noise) {
    case NoiseKind::normal: {
      std::normal_distribution<double> unit;
      noise = unit(engine);
      break;
    }
    case NoiseKind::student_t3: {
      // Unit-variance heavy tails: Var(t_3) = 3, so divide by sqrt(3).
      std::student_t_distribution<double> t3(3.0);
      noise = t3(engine) / std::sqrt(3.0);
      break;
    }
  }
  double answer = truth.means[i] + truth.worker_sd[i] * noise;
  if (truth.clamp) answer = std::clamp(answer, truth.clamp->first, truth.clamp->second);
  return answer;
}

ExperimentSummary run_experiment(const GroundTruth& truth, const ConstraintSet& constraints,
                                 const std::vector<LossSpec>& specs, const SelectionConfig& cfg,
                                 int budget, int replicates, std::uint64_t seed, int threads) {
  const std::size_t n = constraints.n_vars();
  if (truth.means.size() != n || specs.size() != n)
    throw std::invalid_argument("run_experiment: size mismatch");
  if (budget < 1) throw std::invalid_argument("run_experiment: budget must be >= 1");
  if (replicates < 1) throw std::invalid_argument("run_experiment: replicates must be >= 1");

  std::vector<SimTrace> traces(static_cast<std::size_t>(replicates));

  auto run_one = [&](int r) {
    std::mt19937_64 engine =
        make_engine(mix_seed(seed, kAnswerSalt, static_cast<std::uint64_t>(r)));
    SelectionConfig rep_cfg = cfg;
    rep_cfg.seed = mix_seed(seed, kPolicySalt, static_cast<std::uint64_t>(r));
    EstimatorState state = EstimatorState::make(n, constraints);
    AnswerSource source = [&](int variable, int) { return worker_answer(truth, variable, engine); };
    LossProbe probe = [&](const std::vector<double>& prediction) {
      return total_loss(specs, truth.means, prediction);
    };
    BudgetResult result = run_budget(std::move(state), specs, rep_cfg, budget, source, probe);
    traces[static_cast<std::size_t>(r)] = std::move(result.trace);
  };

  if (threads <= 1 || replicates == 1) {
    for (int r = 0; r < replicates; ++r) run_one(r);
  } else {
    const int workers = std::min(threads, replicates);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (int r = w; r < replicates; r += workers) run_one(r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ExperimentSummary summary;
  summary.mean_true_loss.assign(static_cast<std::size_t>(budget), 0.0);
  summary.stderr_true_loss.assign(static_cast<std::size_t>(budget), 0.0);
  summary.final_true_losses.resize(static_cast<std::size_t>(replicates));
  const double big_r = static_cast<double>(replicates);
  for (std::size_t step = 0; step < static_cast<std::size_t>(budget); ++step) {
    double mean = 0.0;
    for (int r = 0; r < replicates; ++r)
      mean += traces[static_cast<std::size_t>(r)].rows[step].true_loss;
    mean /= big_r;
    double ss = 0.0;
    for (int r = 0; r < replicates; ++r) {
      const double d = traces[static_cast<std::size_t>(r)].rows[step].true_loss - mean;
      ss += d * d;
    }
    summary.mean_true_loss[step] = mean;
    summary.stderr_true_loss[step] =
        replicates > 1 ? std::sqrt(ss / (big_r - 1.0)) / std::sqrt(big_r) : 0.0;
  }
  for (int r = 0; r < replicates; ++r)
    summary.final_true_losses[static_cast<std::size_t>(r)] =
        traces[static_cast<std::size_t>(r)].rows.back().true_loss;
  summary.first_trace = std::move(traces.front());
  return summary;
}

}  // namespace crowdest
