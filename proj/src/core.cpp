#include "crowdest/core.hpp"

#include <cmath>

namespace crowdest {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

// Recognizes the full chain pattern: exactly n-1 rows, each with -1 at some
// position i and +1 at i+1, zeros elsewhere, every adjacent pair covered once.
bool detect_chain(std::size_t n, const std::vector<std::vector<double>>& rows) {
  if (n == 1) return rows.empty();
  if (rows.size() != n - 1) return false;
  std::vector<bool> seen(n - 1, false);
  for (const auto& row : rows) {
    std::size_t minus_at = n;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = row[j];
      if (c == 0.0) continue;
      if (c == -1.0 && minus_at == n && j + 1 < n && row[j + 1] == 1.0) {
        minus_at = j;
        ++j;  // skip the +1 we just matched
      } else {
        return false;
      }
    }
    if (minus_at == n || seen[minus_at]) return false;
    seen[minus_at] = true;
  }
  return true;
}

}  // namespace

ConstraintSet::ConstraintSet(std::size_t n_vars, std::vector<std::vector<double>> rows)
    : n_vars_(n_vars), rows_(std::move(rows)) {
  if (n_vars_ == 0) throw std::invalid_argument("ConstraintSet: n_vars must be >= 1");
  for (const auto& row : rows_) {
    if (row.size() != n_vars_)
      throw std::invalid_argument("ConstraintSet: row length does not match n_vars");
    for (double c : row) require_finite(c, "constraint coefficient");
  }
  is_chain_ = detect_chain(n_vars_, rows_);
}

ConstraintSet ConstraintSet::none(std::size_t n_vars) { return ConstraintSet(n_vars, {}); }

ConstraintSet ConstraintSet::chain(std::size_t n_vars) {
  std::vector<std::vector<double>> rows;
  rows.reserve(n_vars > 0 ? n_vars - 1 : 0);
  for (std::size_t i = 0; i + 1 < n_vars; ++i) {
    std::vector<double> row(n_vars, 0.0);
    row[i] = -1.0;
    row[i + 1] = 1.0;
    rows.push_back(std::move(row));
  }
  return ConstraintSet(n_vars, std::move(rows));
}

LossSpec LossSpec::threshold(double tau) {
  require_finite(tau, "tau");
  return LossSpec{LossKind::threshold, tau};
}

LossSpec LossSpec::absolute() { return LossSpec{LossKind::absolute, 0.0}; }

LossSpec LossSpec::squared() { return LossSpec{LossKind::squared, 0.0}; }

double point_loss(const LossSpec& spec, double truth, double prediction) {
  require_finite(truth, "truth");
  require_finite(prediction, "prediction");
  switch (spec.kind) {
    case LossKind::threshold: {
      const bool above = truth < spec.tau && spec.tau < prediction;
      const bool below = prediction < spec.tau && spec.tau < truth;
      return (above || below) ? 1.0 : 0.0;
    }
    case LossKind::absolute:
      return std::abs(truth - prediction);
    case LossKind::squared: {
      const double d = truth - prediction;
      return d * d;
    }
  }
  throw std::invalid_argument("point_loss: unknown loss kind");
}

double total_loss(const std::vector<LossSpec>& specs, const std::vector<double>& truth,
                  const std::vector<double>& prediction) {
  if (specs.size() != truth.size() || truth.size() != prediction.size())
    throw std::invalid_argument("total_loss: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    acc += point_loss(specs[i], truth[i], prediction[i]);
  return acc;
}

bool check_feasible(const ConstraintSet& constraints, const std::vector<double>& witness,
                    double tol) {
  if (witness.size() != constraints.n_vars())
    throw std::invalid_argument("check_feasible: witness length does not match n_vars");
  if (!(tol >= 0.0)) throw std::invalid_argument("check_feasible: tol must be >= 0");
  for (double v : witness) require_finite(v, "witness entry");
  for (const auto& row : constraints.rows()) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) lhs += row[j] * witness[j];
    if (lhs > tol) return false;
  }
  return true;
}

}  // namespace crowdest
