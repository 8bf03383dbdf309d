#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aif/model.hpp"

namespace aif {

/// Joint state spaces larger than this are not enumerated.
inline constexpr std::size_t kEnumerationLimit = 1'000'000;

struct ExactPosterior {
  BeliefState beliefs;   ///< per-factor marginals of the joint posterior
  double log_evidence;   ///< ln sum_s p(o, s)
  std::vector<double> joint;
};

/// Reference posterior by enumerating every joint state.
ExactPosterior exact_posterior(const GenerativeModel& m, const Observation& obs);
/// As above with `prior` in place of the model's D.
ExactPosterior exact_posterior(const GenerativeModel& m, const Observation& obs, const BeliefState& prior);
/// Several observations of one static hidden state, each conditionally
/// independent given the state (no transitions between them).
ExactPosterior exact_posterior(const GenerativeModel& m, std::span<const Observation> sequence);

struct FreeEnergyReport {
  double free_energy = 0.0;
  double complexity = 0.0;  ///< sum_f KL(q_f || prior_f)
  double accuracy = 0.0;    ///< E_q[ln p(o | s)]
  std::optional<double> negative_log_evidence;

  /// Flat key/value form used in experiment logs.
  std::vector<std::pair<std::string, double>> to_record() const;
};

/// Free energy of mean-field beliefs `q`, reported as complexity minus accuracy.
FreeEnergyReport variational_free_energy(const BeliefState& q, const GenerativeModel& m, const Observation& obs,
                                         bool with_evidence = false);
FreeEnergyReport variational_free_energy(const BeliefState& q, const GenerativeModel& m, const Observation& obs,
                                         const BeliefState& prior, bool with_evidence = false);

struct InferenceOptions {
  int max_iters = 50;
  double tol = 1e-8;      ///< on the L-infinity change of any posterior entry
  double damping = 0.5;   ///< weight kept on the previous log-posterior
};

struct InferenceResult {
  BeliefState beliefs;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Mean-field fixed-point state inference. Each factor's posterior is set
/// proportional to exp(ln prior + expected log-likelihood under the other
/// factors), damped in log space, until the largest change drops below tol.
/// A non-converged result is still returned with converged == false.
InferenceResult infer_states(const GenerativeModel& m, const Observation& obs, const InferenceOptions& opts = {});
InferenceResult infer_states(const GenerativeModel& m, const Observation& obs, const BeliefState& prior,
                             const InferenceOptions& opts = {});

/// Concentration parameters of a Dirichlet over a stochastic tensor whose first
/// axis is the normalized one. Every entry is strictly positive.
class DirichletCounts {
 public:
  explicit DirichletCounts(Tensor counts);
  static DirichletCounts filled(std::vector<std::size_t> shape, double value);

  const Tensor& counts() const noexcept { return counts_; }
  /// Expected parameters: counts normalized along the first axis.
  Tensor expected() const;

 private:
  Tensor counts_;
};

/// counts[o, s...] += lr * prod_f q_f(s_f) for the observed outcome only.
DirichletCounts update_likelihood_counts(const DirichletCounts& counts, std::size_t outcome, const BeliefState& q,
                                         double lr = 1.0);
/// counts[s', s, u] += lr * q_next(s') * q_prev(s).
DirichletCounts update_transition_counts(const DirichletCounts& counts, const Categorical& q_prev,
                                         const Categorical& q_next, std::size_t control, double lr = 1.0);

struct ModelComparisonResult {
  std::vector<double> free_energies;  ///< -ln evidence per candidate
  std::size_t selected = 0;           ///< argmin, ties to the lowest index
};

ModelComparisonResult compare_models(std::span<const GenerativeModel> candidates, std::span<const Observation> sequence);
ModelComparisonResult compare_models(std::span<const GenerativeModel> candidates, const Observation& obs);

}  // namespace aif
