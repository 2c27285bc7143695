#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "crowdest/core.hpp"
#include "crowdest/rng.hpp"

using namespace crowdest;

TEST_CASE("threshold loss counts strict crossings only") {
  const LossSpec spec = LossSpec::threshold(6.0);
  CHECK(point_loss(spec, 5.0, 6.5) == 1.0);
  CHECK(point_loss(spec, 6.5, 5.0) == 1.0);
  CHECK(point_loss(spec, 5.0, 5.5) == 0.0);
  CHECK(point_loss(spec, 7.0, 8.0) == 0.0);
  // Landing exactly on the threshold is not a crossing.
  CHECK(point_loss(spec, 6.0, 8.0) == 0.0);
  CHECK(point_loss(spec, 4.0, 6.0) == 0.0);
  CHECK(point_loss(spec, 6.0, 6.0) == 0.0);
}

TEST_CASE("absolute and squared losses") {
  CHECK(point_loss(LossSpec::absolute(), 5.0, 6.5) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(point_loss(LossSpec::squared(), 5.0, 6.5) == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(point_loss(LossSpec::absolute(), 3.0, 3.0) == 0.0);
  CHECK(point_loss(LossSpec::squared(), 3.0, 3.0) == 0.0);
}

TEST_CASE("point_loss rejects non-finite inputs") {
  CHECK_THROWS_AS(point_loss(LossSpec::squared(), std::nan(""), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(point_loss(LossSpec::squared(), 1.0, INFINITY), std::invalid_argument);
}

TEST_CASE("point_loss properties over random inputs") {
  std::mt19937_64 engine = make_engine(101);
  std::uniform_real_distribution<double> pick(-20.0, 20.0);
  for (int i = 0; i < 2000; ++i) {
    const double truth = pick(engine);
    const double pred = pick(engine);
    const double tau = pick(engine);
    const LossSpec thr = LossSpec::threshold(tau);

    const double lt = point_loss(thr, truth, pred);
    const double la = point_loss(LossSpec::absolute(), truth, pred);
    const double ls = point_loss(LossSpec::squared(), truth, pred);

    CHECK(lt >= 0.0);
    CHECK((lt == 0.0 || lt == 1.0));
    CHECK(la >= 0.0);
    CHECK(ls == doctest::Approx(la * la).epsilon(1e-12));

    // All three losses are symmetric in truth and prediction.
    CHECK(point_loss(thr, pred, truth) == lt);
    CHECK(point_loss(LossSpec::absolute(), pred, truth) == la);
    CHECK(point_loss(LossSpec::squared(), pred, truth) == ls);

    // Shrinking the error toward the truth never increases the loss.
    const double closer = truth + 0.5 * (pred - truth);
    CHECK(point_loss(LossSpec::absolute(), truth, closer) <= la);
    CHECK(point_loss(LossSpec::squared(), truth, closer) <= ls);
    CHECK(point_loss(thr, truth, closer) <= lt);
  }
}

TEST_CASE("total_loss sums per-variable threshold losses") {
  const std::vector<LossSpec> specs(3, LossSpec::threshold(6.0));
  const std::vector<double> truth{8.0, 5.0, 3.0};
  const std::vector<double> pred{7.0, 6.5, 3.0};
  CHECK(total_loss(specs, truth, pred) == 1.0);
}

TEST_CASE("total_loss is additive and validates sizes") {
  std::mt19937_64 engine = make_engine(102);
  std::uniform_real_distribution<double> pick(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<LossSpec> specs;
    std::vector<double> truth, pred;
    double manual = 0.0;
    for (int j = 0; j < 5; ++j) {
      const int kind = j % 3;
      const LossSpec spec = kind == 0   ? LossSpec::threshold(pick(engine))
                            : kind == 1 ? LossSpec::absolute()
                                        : LossSpec::squared();
      specs.push_back(spec);
      truth.push_back(pick(engine));
      pred.push_back(pick(engine));
      manual += point_loss(spec, truth.back(), pred.back());
    }
    CHECK(total_loss(specs, truth, pred) == doctest::Approx(manual).epsilon(1e-13));
  }
  CHECK_THROWS_AS(total_loss(std::vector<LossSpec>(2, LossSpec::absolute()), {1.0}, {1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("chain constraint rows have -1 then +1 per adjacent pair") {
  const ConstraintSet chain = ConstraintSet::chain(3);
  REQUIRE(chain.n_vars() == 3);
  REQUIRE(chain.rows().size() == 2);
  CHECK(chain.rows()[0] == std::vector<double>{-1.0, 1.0, 0.0});
  CHECK(chain.rows()[1] == std::vector<double>{0.0, -1.0, 1.0});
  CHECK(chain.is_chain());
}

TEST_CASE("chain detection is syntactic") {
  // Any row order is still the chain.
  ConstraintSet reordered(3, {{0.0, -1.0, 1.0}, {-1.0, 1.0, 0.0}});
  CHECK(reordered.is_chain());
  // A scaled row encodes the same geometry but not the chain pattern.
  ConstraintSet scaled(3, {{-2.0, 2.0, 0.0}, {0.0, -1.0, 1.0}});
  CHECK_FALSE(scaled.is_chain());
  // Missing or duplicated pairs are not chains.
  CHECK_FALSE(ConstraintSet(3, {{-1.0, 1.0, 0.0}}).is_chain());
  CHECK_FALSE(ConstraintSet(3, {{-1.0, 1.0, 0.0}, {-1.0, 1.0, 0.0}}).is_chain());
  // Non-adjacent difference rows are not chains.
  CHECK_FALSE(ConstraintSet(3, {{-1.0, 0.0, 1.0}, {0.0, -1.0, 1.0}}).is_chain());
  CHECK_FALSE(ConstraintSet::none(2).is_chain());
  CHECK(ConstraintSet::none(1).is_chain());
  CHECK(ConstraintSet::chain(1).is_chain());
}

TEST_CASE("constraint set validation") {
  CHECK_THROWS_AS(ConstraintSet(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintSet(2, {{1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintSet(2, {{1.0, std::nan("")}}), std::invalid_argument);
}

TEST_CASE("check_feasible on the chain") {
  const ConstraintSet chain = ConstraintSet::chain(3);
  CHECK(check_feasible(chain, {9.0, 7.5, 7.5}, kFeasibilityTol));
  CHECK(check_feasible(chain, {9.0, 7.0, 8.0}, kFeasibilityTol) == false);
  CHECK(check_feasible(ConstraintSet::none(3), {1.0, 5.0, 2.0}, 0.0));
}

TEST_CASE("check_feasible tolerance is a one-sided slack") {
  const ConstraintSet chain = ConstraintSet::chain(2);
  const std::vector<double> nearly{5.0, 5.0 + 1e-10};
  CHECK(check_feasible(chain, nearly, 1e-9));
  CHECK_FALSE(check_feasible(chain, nearly, 1e-12));
  // Larger tolerance never flips feasible to infeasible.
  std::mt19937_64 engine = make_engine(103);
  std::uniform_real_distribution<double> pick(-5.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> w{pick(engine), pick(engine)};
    if (check_feasible(chain, w, 1e-9)) CHECK(check_feasible(chain, w, 1e-6));
  }
}

TEST_CASE("check_feasible validates inputs") {
  const ConstraintSet chain = ConstraintSet::chain(2);
  CHECK_THROWS_AS(check_feasible(chain, {1.0}, 1e-9), std::invalid_argument);
  CHECK_THROWS_AS(check_feasible(chain, {1.0, 2.0}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(check_feasible(chain, {1.0, std::nan("")}, 1e-9), std::invalid_argument);
}
