#include "crowdest/interpolator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include "crowdest/rng.hpp"

namespace crowdest {

namespace {

void validate_segment(const ChainSegment& seg) {
  if (seg.left_index < 1 || seg.right_index <= seg.left_index)
    throw std::invalid_argument("ChainSegment: need left_index >= 1 and right_index > left_index");
  if (seg.k <= seg.left_index || seg.k >= seg.right_index)
    throw std::invalid_argument("ChainSegment: k must lie strictly between the endpoints");
  if (!std::isfinite(seg.left_model.mean) || !std::isfinite(seg.right_model.mean) ||
      !std::isfinite(seg.left_model.variance) || !std::isfinite(seg.right_model.variance) ||
      seg.left_model.variance < 0.0 || seg.right_model.variance < 0.0)
    throw std::invalid_argument("ChainSegment: invalid endpoint models");
}

double rank_fraction(const ChainSegment& seg) {
  return static_cast<double>(seg.k - seg.left_index) /
         static_cast<double>(seg.right_index - seg.left_index);
}

}  // namespace

double interpolate_mean(const ChainSegment& seg) {
  validate_segment(seg);
  const double t = rank_fraction(seg);
  return seg.left_model.mean + t * (seg.right_model.mean - seg.left_model.mean);
}

double beta_order_variance(int k, int span, double a, double b) {
  if (span < 2) throw std::invalid_argument("beta_order_variance: span must be >= 2");
  if (k <= 1 || k >= span + 1)
    throw std::invalid_argument("beta_order_variance: k must satisfy 1 < k < span + 1");
  if (!std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("beta_order_variance: endpoints must be finite");
  const double alpha = static_cast<double>(k - 1);
  const double beta = static_cast<double>(span + 1 - k);
  const double s = alpha + beta;
  const double d = a - b;
  return d * d * alpha * beta / (s * s * (s + 1.0));
}

double interpolate_variance(const ChainSegment& seg, long mc_draws, std::uint64_t seed) {
  validate_segment(seg);
  if (mc_draws < 1) throw std::invalid_argument("interpolate_variance: mc_draws must be >= 1");
  const int span = seg.right_index - seg.left_index;
  const int k_rel = seg.k - seg.left_index + 1;
  const double t = rank_fraction(seg);
  const double sd_l = std::sqrt(seg.left_model.variance);
  const double sd_r = std::sqrt(seg.right_model.variance);

  std::mt19937_64 engine = make_engine(seed);
  std::normal_distribution<double> unit;

  // Law of total variance across endpoint draws: mean of the conditional
  // order-statistic variance plus the spread of the conditional means.
  double bv_sum = 0.0;
  double m_mean = 0.0;
  double m_m2 = 0.0;
  for (long j = 0; j < mc_draws; ++j) {
    double a = seg.left_model.mean + sd_l * unit(engine);
    double b = seg.right_model.mean + sd_r * unit(engine);
    if (a < b) std::swap(a, b);
    bv_sum += beta_order_variance(k_rel, span, a, b);
    const double m = a + t * (b - a);
    const double d = m - m_mean;
    m_mean += d / static_cast<double>(j + 1);
    m_m2 += d * (m - m_mean);
  }
  const double draws = static_cast<double>(mc_draws);
  return bv_sum / draws + m_m2 / draws;
}

double interpolate_variance_closed(const ChainSegment& seg) {
  validate_segment(seg);
  const int span = seg.right_index - seg.left_index;
  const int k_rel = seg.k - seg.left_index + 1;
  const double t = rank_fraction(seg);
  const double alpha = static_cast<double>(k_rel - 1);
  const double beta = static_cast<double>(span + 1 - k_rel);
  const double s = alpha + beta;
  const double c = alpha * beta / (s * s * (s + 1.0));
  const double dm = seg.left_model.mean - seg.right_model.mean;
  const double gap_sq = dm * dm + seg.left_model.variance + seg.right_model.variance;
  return c * gap_sq + (1.0 - t) * (1.0 - t) * seg.left_model.variance +
         t * t * seg.right_model.variance;
}

EstimatorState fill_chain(const EstimatorState& state, long mc_draws, std::uint64_t seed) {
  if (!state.constraints.is_chain())
    throw UnsupportedConstraintsError("fill_chain: constraints are not a chain");
  if (!state.constrained_means)
    throw std::invalid_argument("fill_chain: state must be refitted first");
  const std::size_t n = state.n_vars();

  std::vector<std::size_t> sampled;
  for (std::size_t i = 0; i < n; ++i)
    if (!state.variables[i].samples.empty()) sampled.push_back(i);
  if (sampled.empty()) throw EmptySamplesError("fill_chain: no variable has samples");

  // Sampling-distribution model of a sampled variable's constrained mean.
  auto model_of = [&](std::size_t i) {
    const double var = state.reestimated_variances[i] ? *state.reestimated_variances[i] : 0.0;
    const double count = static_cast<double>(state.variables[i].samples.size());
    return NormalParams{(*state.constrained_means)[i], var / count};
  };

  EstimatorState out = state;
  std::size_t next_sampled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!state.variables[i].samples.empty()) continue;
    while (next_sampled < sampled.size() && sampled[next_sampled] < i) ++next_sampled;
    const bool has_right = next_sampled < sampled.size();
    const bool has_left = next_sampled > 0;
    if (has_left && has_right) {
      ChainSegment seg;
      seg.left_index = static_cast<int>(sampled[next_sampled - 1]) + 1;
      seg.right_index = static_cast<int>(sampled[next_sampled]) + 1;
      seg.k = static_cast<int>(i) + 1;
      seg.left_model = model_of(sampled[next_sampled - 1]);
      seg.right_model = model_of(sampled[next_sampled]);
      (*out.constrained_means)[i] = interpolate_mean(seg);
      out.reestimated_variances[i] =
          interpolate_variance(seg, mc_draws, mix_seed(seed, static_cast<std::uint64_t>(i)));
    } else {
      // Before the first or past the last sampled position: copy the
      // nearest sampled model.
      const std::size_t src = has_right ? sampled[next_sampled] : sampled.back();
      const NormalParams m = model_of(src);
      (*out.constrained_means)[i] = m.mean;
      out.reestimated_variances[i] = m.variance;
    }
  }
  return out;
}

}  // namespace crowdest
