#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "crowdest/core.hpp"

namespace crowdest {

// Node counts for the two nested quadratures. error_nodes integrates the
// answer distribution inside expected_error for losses without a closed
// form; decrease_nodes integrates over the hypothetical next answer in
// expected_error_decrease.
struct IntegrationConfig {
  int error_nodes = 64;
  int decrease_nodes = 32;
};

// Maximum-likelihood normal fit: sample mean and population variance
// (divisor N, not N-1). Throws EmptySamplesError on no samples.
NormalParams fit_mle(const std::vector<double>& samples);

// Expected loss of predicting params.mean when the unknown true value is
// distributed Normal(params.mean, params.variance / n_samples), i.e. the
// sampling distribution of the mean under the fitted model.
//
// threshold loss integrates to Phi(-|tau - mean| * sqrt(n) / sd) and
// absolute loss to sd / sqrt(n) * sqrt(2/pi); both are evaluated in closed
// form. Other losses go through Gauss-Hermite quadrature with
// cfg.error_nodes points.
double expected_error(const NormalParams& params, std::size_t n_samples, const LossSpec& spec,
                      const IntegrationConfig& cfg = {});

// Drop in expected error from appending the answer x to samples:
//   expected_error(fit(samples)) - expected_error(fit(samples + {x})).
// May be negative when x moves the estimate the wrong way.
double error_decrease(const std::vector<double>& samples, double x, const LossSpec& spec,
                      const IntegrationConfig& cfg = {});

// error_decrease averaged over the next answer x, itself modeled as
// Normal(mean, variance) under the current fit. This is the value-of-
// information score an active questioner maximizes.
double expected_error_decrease(const std::vector<double>& samples, const LossSpec& spec,
                               const IntegrationConfig& cfg = {});

}  // namespace crowdest
