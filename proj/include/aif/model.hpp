#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "aif/core.hpp"

namespace aif {

/// Observed outcome index per modality.
using Observation = std::vector<std::size_t>;
/// One control index per hidden-state factor.
using Action = std::vector<std::size_t>;

/// Candidate course of action: controls[t][f] is the control applied to factor f at step t.
struct Policy {
  std::vector<Action> controls;

  std::size_t horizon() const noexcept { return controls.size(); }
  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Per-factor posterior beliefs held by one agent.
struct BeliefState {
  std::vector<Categorical> factors;
  /// Optional per-factor confidence weights (> 0). Empty when unused.
  std::vector<double> precision;

  std::size_t num_factors() const noexcept { return factors.size(); }
  const Categorical& operator[](std::size_t f) const { return factors[f]; }
  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

/// Discrete-state generative model.
///
/// A[m] has shape [outcomes_m, dims_0, ..., dims_{F-1}] (row-major), so each
/// slice over the outcome axis is a distribution p(o | s).
/// B[f] has shape [dims_f, dims_f, controls_f] holding p(s' | s, u) with s' first.
/// C[m] holds unnormalized log-preferences over outcomes.
struct GenerativeModel {
  std::vector<std::size_t> factor_dims;
  std::vector<std::size_t> modality_dims;
  std::vector<Tensor> A;
  std::vector<Tensor> B;
  std::vector<std::vector<double>> C;
  std::vector<Categorical> D;
  Categorical E;
  std::vector<Policy> policies;

  std::size_t num_factors() const noexcept { return factor_dims.size(); }
  std::size_t num_modalities() const noexcept { return modality_dims.size(); }
  std::size_t num_controls(std::size_t factor) const;
  /// Product of factor cardinalities.
  std::size_t num_states() const;
  StateSpace state_space() const { return StateSpace(factor_dims); }
  BeliefState prior() const { return BeliefState{D, {}}; }
};

struct Violation {
  std::string path;
  std::string message;
};

/// Every invariant violation in `m`, each with a path to the offending slice.
std::vector<Violation> validate_model(const GenerativeModel& m);

/// Thrown by the model loader; carries the same violations validate_model reports.
class ModelError : public Error {
 public:
  explicit ModelError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Throws ModelError unless `m` is valid.
void require_valid(const GenerativeModel& m);

/// Every combination of per-factor controls repeated over `horizon` steps.
std::vector<Policy> enumerate_policies(const GenerativeModel& m, std::size_t horizon);

/// Checks that beliefs line up with the model's factor cardinalities.
void check_beliefs(const GenerativeModel& m, const BeliefState& q);
void check_observation(const GenerativeModel& m, const Observation& obs);

}  // namespace aif
