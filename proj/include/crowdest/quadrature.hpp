#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace crowdest {

// Nodes and weights for Gauss-Hermite quadrature with weight function
// exp(-x^2) on the whole real line. Nodes are in ascending order and
// weights sum to sqrt(pi).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Returns the cached n-point rule. Computed once per n, thread safe.
// Throws std::invalid_argument for n < 1 or n > 512.
const GaussHermiteRule& gauss_hermite_rule(int n);

// E[f(X)] for X ~ Normal(mean, sd^2) by the substitution x = mean + sqrt(2)*sd*t:
//   (1/sqrt(pi)) * sum_i w_i * f(mean + sqrt(2)*sd*t_i).
// sd == 0 degenerates to f(mean).
template <class F>
double gaussian_expectation(double mean, double sd, const GaussHermiteRule& rule, F&& f) {
  if (sd == 0.0) return f(mean);
  const double scale = std::sqrt(2.0) * sd;
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * f(mean + scale * rule.nodes[i]);
  }
  return acc / std::sqrt(M_PI);
}

// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace crowdest
