#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numeric>

#include "crowdest/rng.hpp"
#include "crowdest/sim.hpp"

using namespace crowdest;

TEST_CASE("linear_decreasing truth follows the affine formula") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  const GroundTruth truth =
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(10), 1);
  REQUIRE(truth.means.size() == 10);
  CHECK(truth.means[0] == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(truth.means[1] == doctest::Approx(9.0 - 2.0 / 3.0).epsilon(1e-14));
  CHECK(truth.means[9] == doctest::Approx(3.0).epsilon(1e-15));
  for (std::size_t i = 0; i + 1 < 10; ++i) {
    const double step = truth.means[i + 1] - truth.means[i];
    CHECK(step == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  }
  // A single variable sits at the high end.
  const GroundTruth one =
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(1), 1);
  CHECK(one.means == std::vector<double>{9.0});
}

TEST_CASE("explicit truth is validated against the constraints") {
  GroundTruthParams params;
  params.values = {8.0, 7.0, 6.0, 5.0, 4.0};
  const GroundTruth truth =
      make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(5), 1);
  CHECK(truth.means == params.values);

  params.values = {8.0, 9.0, 6.0, 5.0, 4.0};
  CHECK_THROWS_AS(make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(5), 1),
                  std::invalid_argument);
  params.values = {8.0, 7.0};
  CHECK_THROWS_AS(make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(5), 1),
                  std::invalid_argument);
}

TEST_CASE("logistic truth is a decreasing cliff") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  params.steepness = 1.5;
  const GroundTruth truth =
      make_ground_truth(TruthKind::logistic, params, ConstraintSet::chain(10), 1);
  for (std::size_t i = 0; i + 1 < 10; ++i) CHECK(truth.means[i] > truth.means[i + 1]);
  for (double m : truth.means) {
    CHECK(m > 3.0);
    CHECK(m < 9.0);
  }
  // The default midpoint centers the curve: positions i and n+1-i mirror
  // around (high+low)/2.
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(truth.means[i] + truth.means[9 - i] == doctest::Approx(12.0).epsilon(1e-12));
  // An explicit midpoint puts the half level exactly there.
  params.midpoint = 3.0;
  const GroundTruth shifted =
      make_ground_truth(TruthKind::logistic, params, ConstraintSet::chain(10), 1);
  CHECK(shifted.means[2] == doctest::Approx(6.0).epsilon(1e-12));
  params.steepness = 0.0;
  CHECK_THROWS_AS(make_ground_truth(TruthKind::logistic, params, ConstraintSet::chain(10), 1),
                  std::invalid_argument);
}

TEST_CASE("random_monotone truth is sorted and seeded") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  const GroundTruth a =
      make_ground_truth(TruthKind::random_monotone, params, ConstraintSet::chain(12), 5);
  const GroundTruth b =
      make_ground_truth(TruthKind::random_monotone, params, ConstraintSet::chain(12), 5);
  const GroundTruth c =
      make_ground_truth(TruthKind::random_monotone, params, ConstraintSet::chain(12), 6);
  CHECK(a.means == b.means);
  CHECK(a.means != c.means);
  for (std::size_t i = 0; i + 1 < 12; ++i) CHECK(a.means[i] >= a.means[i + 1]);
  for (double m : a.means) {
    CHECK(m >= 3.0);
    CHECK(m <= 9.0);
  }
  params.low = 10.0;
  CHECK_THROWS_AS(make_ground_truth(TruthKind::random_monotone, params, ConstraintSet::chain(3), 1),
                  std::invalid_argument);
}

TEST_CASE("noise configuration is validated") {
  GroundTruthParams params;
  params.worker_sd = -1.0;
  CHECK_THROWS_AS(
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(3), 1),
      std::invalid_argument);
  params.worker_sd = 1.0;
  params.worker_sd_per_var = {1.0, 2.0};
  CHECK_THROWS_AS(
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(3), 1),
      std::invalid_argument);
  params.worker_sd_per_var = {1.0, 2.0, 3.0};
  const GroundTruth truth =
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(3), 1);
  CHECK(truth.worker_sd == params.worker_sd_per_var);
  params.clamp = {10.0, 0.0};
  CHECK_THROWS_AS(
      make_ground_truth(TruthKind::linear_decreasing, params, ConstraintSet::chain(3), 1),
      std::invalid_argument);
}

TEST_CASE("noiseless workers answer exactly") {
  GroundTruthParams params;
  params.values = {8.0, 6.0, 4.0};
  params.worker_sd = 0.0;
  const GroundTruth truth =
      make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(3), 1);
  std::mt19937_64 engine = make_engine(2);
  for (int i = 1; i <= 3; ++i)
    CHECK(worker_answer(truth, i, engine) == params.values[static_cast<std::size_t>(i - 1)]);
  CHECK_THROWS_AS(worker_answer(truth, 0, engine), std::invalid_argument);
  CHECK_THROWS_AS(worker_answer(truth, 4, engine), std::invalid_argument);
}

TEST_CASE("worker answers average to the true mean") {
  GroundTruthParams params;
  params.values = {8.0, 6.0, 4.0};
  params.worker_sd = 2.0;
  const GroundTruth truth =
      make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(3), 1);
  std::mt19937_64 engine = make_engine(3);
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += worker_answer(truth, 2, engine);
  const double mean = sum / draws;
  CHECK(std::abs(mean - 6.0) < 4.0 * 2.0 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("clamped answers stay inside the range") {
  GroundTruthParams params;
  params.values = {5.0};
  params.worker_sd = 50.0;
  params.clamp = {0.0, 10.0};
  const GroundTruth truth =
      make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(1), 1);
  std::mt19937_64 engine = make_engine(4);
  bool hit_low = false, hit_high = false;
  for (int i = 0; i < 2000; ++i) {
    const double a = worker_answer(truth, 1, engine);
    CHECK(a >= 0.0);
    CHECK(a <= 10.0);
    hit_low = hit_low || a == 0.0;
    hit_high = hit_high || a == 10.0;
  }
  CHECK(hit_low);
  CHECK(hit_high);
}

TEST_CASE("heavy-tailed noise is scaled to unit variance") {
  // The scaled t(3) has E|noise| = 2/pi, so the mean absolute deviation of
  // answers is worker_sd * 2/pi. Without the scaling it would be sqrt(3)
  // times larger, which this tolerance excludes.
  GroundTruthParams params;
  params.values = {5.0};
  params.worker_sd = 1.0;
  params.noise = NoiseKind::student_t3;
  const GroundTruth truth =
      make_ground_truth(TruthKind::explicit_values, params, ConstraintSet::chain(1), 1);
  std::mt19937_64 engine = make_engine(5);
  const int draws = 200000;
  double abs_sum = 0.0;
  for (int i = 0; i < draws; ++i) abs_sum += std::abs(worker_answer(truth, 1, engine) - 5.0);
  CHECK(abs_sum / draws == doctest::Approx(2.0 / 3.141592653589793).epsilon(0.03));
}

TEST_CASE("run_experiment is deterministic in seed and thread count") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  params.worker_sd = 1.0;
  const ConstraintSet chain = ConstraintSet::chain(4);
  const GroundTruth truth = make_ground_truth(TruthKind::linear_decreasing, params, chain, 1);
  const std::vector<LossSpec> specs(4, LossSpec::threshold(6.0));
  SelectionConfig cfg;
  cfg.mode = Mode::constrained;
  cfg.hypothetical_draws = 6;
  cfg.fill_draws = 32;

  const ExperimentSummary a = run_experiment(truth, chain, specs, cfg, 10, 6, 42, 1);
  const ExperimentSummary b = run_experiment(truth, chain, specs, cfg, 10, 6, 42, 1);
  const ExperimentSummary c = run_experiment(truth, chain, specs, cfg, 10, 6, 42, 3);
  CHECK(a.mean_true_loss == b.mean_true_loss);
  CHECK(a.stderr_true_loss == b.stderr_true_loss);
  CHECK(a.final_true_losses == b.final_true_losses);
  CHECK(a.mean_true_loss == c.mean_true_loss);
  CHECK(a.final_true_losses == c.final_true_losses);
  REQUIRE(a.mean_true_loss.size() == 10);
  REQUIRE(a.final_true_losses.size() == 6);
  for (double se : a.stderr_true_loss) {
    CHECK(se >= 0.0);
    CHECK(std::isfinite(se));
  }
  // A different seed changes the answer stream. Final threshold losses can
  // coincide (both runs may end fully correct), so compare raw answers.
  const ExperimentSummary d = run_experiment(truth, chain, specs, cfg, 10, 6, 43, 1);
  REQUIRE(a.first_trace.rows.size() == d.first_trace.rows.size());
  bool any_answer_differs = false;
  for (std::size_t i = 0; i < a.first_trace.rows.size(); ++i)
    if (a.first_trace.rows[i].answer != d.first_trace.rows[i].answer) any_answer_differs = true;
  CHECK(any_answer_differs);
}

TEST_CASE("noiseless answers drive the threshold loss to zero") {
  GroundTruthParams params;
  params.values = {9.0, 7.0, 5.0, 3.0};
  params.worker_sd = 0.0;
  const ConstraintSet chain = ConstraintSet::chain(4);
  const GroundTruth truth = make_ground_truth(TruthKind::explicit_values, params, chain, 1);
  const std::vector<LossSpec> specs(4, LossSpec::threshold(6.0));
  SelectionConfig cfg;
  cfg.mode = Mode::round_robin;
  cfg.estimation = Estimation::constrained;
  const ExperimentSummary s = run_experiment(truth, chain, specs, cfg, 8, 1, 7, 1);
  // From the step where every variable has an answer onward, predictions
  // equal the truth exactly.
  for (std::size_t step = 3; step < 8; ++step) CHECK(s.mean_true_loss[step] == 0.0);
  CHECK(s.final_true_losses == std::vector<double>{0.0});
  for (double se : s.stderr_true_loss) CHECK(se == 0.0);
}

TEST_CASE("trace losses are consistent with the core loss model") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  params.worker_sd = 1.5;
  const ConstraintSet chain = ConstraintSet::chain(5);
  const GroundTruth truth = make_ground_truth(TruthKind::logistic, params, chain, 2);
  const std::vector<LossSpec> specs(5, LossSpec::absolute());
  SelectionConfig cfg;
  cfg.mode = Mode::constrained;
  cfg.hypothetical_draws = 4;
  cfg.fill_draws = 16;
  const ExperimentSummary s = run_experiment(truth, chain, specs, cfg, 12, 2, 11, 1);
  REQUIRE(s.first_trace.rows.size() == 12);
  for (const TraceRow& row : s.first_trace.rows) {
    CHECK(row.true_loss ==
          doctest::Approx(total_loss(specs, truth.means, row.prediction)).epsilon(1e-12));
    CHECK(check_feasible(chain, row.prediction, kFeasibilityTol));
  }
}

TEST_CASE("run_experiment validates sizes and counts") {
  GroundTruthParams params;
  params.high = 9.0;
  params.low = 3.0;
  const ConstraintSet chain = ConstraintSet::chain(3);
  const GroundTruth truth = make_ground_truth(TruthKind::linear_decreasing, params, chain, 1);
  const std::vector<LossSpec> specs(3, LossSpec::squared());
  SelectionConfig cfg;
  CHECK_THROWS_AS(run_experiment(truth, chain, std::vector<LossSpec>(2, LossSpec::squared()), cfg,
                                 5, 2, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_experiment(truth, chain, specs, cfg, 0, 2, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(run_experiment(truth, chain, specs, cfg, 5, 0, 1, 1), std::invalid_argument);
}
