#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdest {

// Result of fitting a normal model to one variable's answers.
// variance is the population (maximum-likelihood) variance, divisor N.
struct NormalParams {
  double mean = 0.0;
  double variance = 0.0;
};

// Per-variable bookkeeping. index is the external 1-based label.
// fitted is present iff samples is non-empty and holds the per-variable
// normal fit of those samples.
struct VariableState {
  int index = 0;
  std::vector<double> samples;
  std::optional<NormalParams> fitted;
};

// Linear inequality constraints over the variable means: rows() * mu <= 0.
// Each row has exactly n_vars coefficients.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(std::size_t n_vars, std::vector<std::vector<double>> rows);

  // No rows; everything is feasible.
  static ConstraintSet none(std::size_t n_vars);

  // Monotone non-increasing chain mu_1 >= mu_2 >= ... >= mu_n, encoded as
  // n-1 rows with -1 at position i and +1 at position i+1.
  static ConstraintSet chain(std::size_t n_vars);

  std::size_t n_vars() const { return n_vars_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  // True when the rows are syntactically the full non-increasing chain
  // pattern (in any row order), or when n_vars == 1 with no rows.
  bool is_chain() const { return is_chain_; }

 private:
  std::size_t n_vars_ = 0;
  std::vector<std::vector<double>> rows_;
  bool is_chain_ = false;
};

enum class LossKind { threshold, absolute, squared };

// Loss of predicting `prediction` when the true value is `truth`.
// threshold: 1 when truth and prediction fall strictly on opposite sides
// of tau, else 0. absolute: |truth - prediction|. squared: the square.
struct LossSpec {
  LossKind kind = LossKind::squared;
  double tau = 0.0;

  static LossSpec threshold(double tau);
  static LossSpec absolute();
  static LossSpec squared();
};

double point_loss(const LossSpec& spec, double truth, double prediction);

// Sum of per-variable point losses. Sizes must agree.
double total_loss(const std::vector<LossSpec>& specs, const std::vector<double>& truth,
                  const std::vector<double>& prediction);

// max_r (row_r . witness) <= tol, vacuously true with no rows.
bool check_feasible(const ConstraintSet& constraints, const std::vector<double>& witness,
                    double tol);

inline constexpr double kFeasibilityTol = 1e-9;

// Raised when a fit is requested for a variable with no answers.
struct EmptySamplesError : std::runtime_error {
  EmptySamplesError() : std::runtime_error("no samples to fit") {}
  explicit EmptySamplesError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a constraint system admits no solution (or the solver can
// prove no solution within tolerance).
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the iterative solver hits its sweep cap while constraints are
// still violated beyond tolerance. Carries the best iterate found.
struct NonConvergenceError : std::runtime_error {
  NonConvergenceError(const std::string& what, std::vector<double> best)
      : std::runtime_error(what), best_iterate(std::move(best)) {}
  std::vector<double> best_iterate;
};

// Raised by chain-only operations when handed a non-chain constraint set.
struct UnsupportedConstraintsError : std::runtime_error {
  explicit UnsupportedConstraintsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace crowdest
