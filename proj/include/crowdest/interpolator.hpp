#pragma once

#include <cstdint>

#include "crowdest/constrained.hpp"
#include "crowdest/core.hpp"

namespace crowdest {

// One gap of a non-increasing chain: sampled endpoints at the 1-based
// positions left_index < right_index, an interior position k strictly
// between them, and the endpoint estimates with their own uncertainty
// (mean plus variance of that mean).
struct ChainSegment {
  int left_index = 0;
  int right_index = 0;
  int k = 0;
  NormalParams left_model;
  NormalParams right_model;
};

// Linear interpolation of the mean by rank between the endpoint means.
double interpolate_mean(const ChainSegment& seg);

// Variance of the k-th of n = span+1 chain positions when the interior
// values between fixed endpoints a and b are modeled as sorted uniform
// draws: the k-th position behaves as a Beta(k-1, n-k) order statistic
// scaled onto [b, a], giving
//   (a - b)^2 * alpha*beta / ((alpha+beta)^2 * (alpha+beta+1)).
// k is the relative position, 1 < k < n; span >= 2.
double beta_order_variance(int k, int span, double a, double b);

// Total variance of the interpolated value at seg.k when the endpoints are
// themselves uncertain: averages the order-statistic variance over Monte
// Carlo draws of the endpoint models and adds the spread of the
// interpolated means across draws. Draws where the endpoints invert are
// repaired by swapping, matching a chain-consistent reading of the pair.
double interpolate_variance(const ChainSegment& seg, long mc_draws, std::uint64_t seed);

// Closed-form counterpart under the no-swap approximation:
//   E[(a-b)^2] * c_k + (1-t)^2 var_a + t^2 var_b,
// with c_k the Beta factor above and t the rank fraction. Used where the
// Monte Carlo version would be too slow; agrees with it when endpoint
// inversion is rare.
double interpolate_variance_closed(const ChainSegment& seg);

// Fills every unsampled variable of a chain-constrained, already refitted
// state: means come from constrained_means (already linearly completed),
// variances from interpolate_variance between the nearest sampled
// neighbors. Positions outside the sampled range copy the nearest sampled
// variable's model. Filled variances describe the mean itself (effective
// sample count 1). Requires is_chain and at least one sampled variable.
EstimatorState fill_chain(const EstimatorState& state, long mc_draws, std::uint64_t seed);

}  // namespace crowdest
