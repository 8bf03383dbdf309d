#pragma once

#include <span>
#include <vector>

#include "aif/model.hpp"

namespace aif {

inline constexpr double kDefaultGamma = 16.0;
/// Joint state spaces up to this size get exact (joint) information gain.
inline constexpr std::size_t kJointInfoGainLimit = 4096;

/// Expected free energy of one policy, summed over timesteps and modalities.
///
/// G = risk + ambiguity = -info_gain - pragmatic. When `exact` is false the
/// information gain is a per-factor approximation and only the first identity
/// holds.
struct PolicyEFE {
  double G = 0.0;
  double risk = 0.0;
  double ambiguity = 0.0;
  double info_gain = 0.0;
  double pragmatic = 0.0;
  bool exact = true;
};

using EFEReport = std::vector<PolicyEFE>;

struct PolicyPosterior {
  Categorical probs;
  double gamma = kDefaultGamma;
};

/// Beliefs after each step of `policy`: q_{t+1,f} = B_f[:, :, u_{t,f}] q_{t,f}.
std::vector<BeliefState> expected_states(const GenerativeModel& m, const BeliefState& belief, const Policy& policy);

/// One-step transition of every factor under `action`.
BeliefState transition(const GenerativeModel& m, const BeliefState& belief, const Action& action);

/// q(o) = sum_s p(o | s) prod_f q_f(s_f), per modality.
std::vector<Categorical> predictive_observations(const GenerativeModel& m, const BeliefState& q);

/// EFE contribution of a single predicted belief state.
PolicyEFE step_free_energy(const GenerativeModel& m, const BeliefState& q);

PolicyEFE expected_free_energy(const GenerativeModel& m, const BeliefState& belief, const Policy& policy);

/// EFE of every policy; evaluated in parallel, reduced by index.
EFEReport evaluate_policies(const GenerativeModel& m, const BeliefState& belief, std::span<const Policy> policies);

/// softmax(ln E - gamma * G).
PolicyPosterior policy_posterior(std::span<const double> G, const Categorical& E, double gamma = kDefaultGamma);

/// Per-factor marginal probability of each first-step control under the policy posterior.
std::vector<std::vector<double>> action_marginals(const PolicyPosterior& pp, std::span<const Policy> policies);

/// Most probable first-step control per factor; ties go to the lowest index.
Action select_action(const PolicyPosterior& pp, std::span<const Policy> policies);

struct PlannerOptions {
  std::size_t depth = 2;
  double prune_threshold = 1.0 / 16.0;
  std::size_t node_budget = 100'000;
};

struct PlanResult {
  Action action;
  double value = 0.0;
  std::size_t nodes = 0;
};

/// Depth-limited recursive planning over future beliefs:
/// value(q, d) = min_a [ G_1(a) + E_{q(o|a)} value(q(s | o, a), d - 1) ].
/// Outcome branches below prune_threshold are dropped and the rest renormalized.
PlanResult plan_sophisticated(const GenerativeModel& m, const BeliefState& belief, const PlannerOptions& opts = {});

/// All joint actions (one control per factor), last factor fastest.
std::vector<Action> enumerate_actions(const GenerativeModel& m);

namespace serial {

EFEReport evaluate_policies(const GenerativeModel& m, const BeliefState& belief, std::span<const Policy> policies);
PlanResult plan_sophisticated(const GenerativeModel& m, const BeliefState& belief, const PlannerOptions& opts = {});

}  // namespace serial

}  // namespace aif
