#include "crowdest/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "crowdest/quadrature.hpp"

namespace crowdest {

NormalParams fit_mle(const std::vector<double>& samples) {
  if (samples.empty()) throw EmptySamplesError();
  double sum = 0.0;
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("fit_mle: sample must be finite");
    sum += s;
  }
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double s : samples) {
    const double d = s - mean;
    ss += d * d;
  }
  return NormalParams{mean, ss / static_cast<double>(samples.size())};
}

double expected_error(const NormalParams& params, std::size_t n_samples, const LossSpec& spec,
                      const IntegrationConfig& cfg) {
  if (n_samples == 0) throw std::invalid_argument("expected_error: n_samples must be >= 1");
  if (!std::isfinite(params.mean) || !std::isfinite(params.variance) || params.variance < 0.0)
    throw std::invalid_argument("expected_error: invalid params");
  const double sd = std::sqrt(params.variance / static_cast<double>(n_samples));
  switch (spec.kind) {
    case LossKind::threshold: {
      // Pr(true value on the far side of tau) under the sampling
      // distribution of the mean. Zero-width distribution never crosses.
      if (sd == 0.0) return 0.0;
      return normal_cdf(-std::abs(spec.tau - params.mean) / sd);
    }
    case LossKind::absolute:
      // E|X - m| for X ~ Normal(m, sd^2).
      return sd * std::sqrt(2.0 / M_PI);
    default: {
      const auto& rule = gauss_hermite_rule(cfg.error_nodes);
      return gaussian_expectation(params.mean, sd, rule,
                                  [&](double x) { return point_loss(spec, x, params.mean); });
    }
  }
}

double error_decrease(const std::vector<double>& samples, double x, const LossSpec& spec,
                      const IntegrationConfig& cfg) {
  if (!std::isfinite(x)) throw std::invalid_argument("error_decrease: x must be finite");
  const NormalParams before = fit_mle(samples);
  const double e_before = expected_error(before, samples.size(), spec, cfg);
  std::vector<double> extended = samples;
  extended.push_back(x);
  const NormalParams after = fit_mle(extended);
  const double e_after = expected_error(after, extended.size(), spec, cfg);
  return e_before - e_after;
}

double expected_error_decrease(const std::vector<double>& samples, const LossSpec& spec,
                               const IntegrationConfig& cfg) {
  const NormalParams fit = fit_mle(samples);
  if (fit.variance == 0.0) {
    // Every hypothetical answer equals the mean; evaluate the single case.
    return error_decrease(samples, fit.mean, spec, cfg);
  }
  const auto& rule = gauss_hermite_rule(cfg.decrease_nodes);
  return gaussian_expectation(fit.mean, std::sqrt(fit.variance), rule,
                              [&](double x) { return error_decrease(samples, x, spec, cfg); });
}

}  // namespace crowdest
