#include "aif/planning.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>

#include "aif/kernels.hpp"

namespace aif {

namespace {

constexpr double kTieTol = 1e-12;

void check_action(const GenerativeModel& m, const Action& action) {
  if (action.size() != m.num_factors()) throw Error(Errc::BadControlIndex, "expected one control per factor");
  for (std::size_t f = 0; f < action.size(); ++f)
    if (action[f] >= m.num_controls(f))
      throw Error(Errc::BadControlIndex, "control " + std::to_string(action[f]) + " out of range for factor " + std::to_string(f));
}

/// Information gain summed over per-factor marginal likelihoods.
double factorwise_info_gain(const Tensor& a, const StateSpace& space, std::span<const Categorical> q,
                            std::span<const double> qo) {
  const std::size_t n = space.size();
  const std::size_t outcomes = qo.size();
  const auto data = a.data();
  double total = 0.0;
  for (std::size_t f = 0; f < space.num_factors(); ++f) {
    const std::size_t d = space.dims()[f];
    // lik[o * d + k] = p(o | s_f = k) with the other factors marginalized under q.
    std::vector<double> lik(outcomes * d, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      double w = 1.0;
      for (std::size_t g = 0; g < space.num_factors(); ++g)
        if (g != f) w *= q[g][space.digit(s, g)];
      const std::size_t k = space.digit(s, f);
      for (std::size_t o = 0; o < outcomes; ++o) lik[o * d + k] += data[o * n + s] * w;
    }
    for (std::size_t o = 0; o < outcomes; ++o) {
      if (qo[o] <= 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double joint = lik[o * d + k] * q[f][k];
        if (joint > 0.0) total += joint * std::log(lik[o * d + k] / qo[o]);
      }
    }
  }
  return total;
}

}  // namespace

BeliefState transition(const GenerativeModel& m, const BeliefState& belief, const Action& action) {
  check_beliefs(m, belief);
  check_action(m, action);
  BeliefState next;
  next.precision = belief.precision;
  for (std::size_t f = 0; f < m.num_factors(); ++f) {
    const std::size_t n = m.factor_dims[f];
    std::vector<double> out(n, 0.0);
    for (std::size_t sp = 0; sp < n; ++sp)
      for (std::size_t s = 0; s < n; ++s) out[sp] += m.B[f].at({sp, s, action[f]}) * belief[f][s];
    next.factors.push_back(normalize(out));
  }
  return next;
}

std::vector<BeliefState> expected_states(const GenerativeModel& m, const BeliefState& belief, const Policy& policy) {
  if (policy.horizon() == 0) throw Error(Errc::BadControlIndex, "policy has no steps");
  std::vector<BeliefState> out;
  out.reserve(policy.horizon());
  const BeliefState* current = &belief;
  for (const auto& action : policy.controls) {
    out.push_back(transition(m, *current, action));
    current = &out.back();
  }
  return out;
}

std::vector<Categorical> predictive_observations(const GenerativeModel& m, const BeliefState& q) {
  check_beliefs(m, q);
  const auto w = kernels::joint_product(m.state_space(), q.factors);
  std::vector<Categorical> out;
  for (std::size_t g = 0; g < m.num_modalities(); ++g) out.push_back(normalize(kernels::predictive(m.A[g], w)));
  return out;
}

PolicyEFE step_free_energy(const GenerativeModel& m, const BeliefState& q) {
  check_beliefs(m, q);
  const StateSpace space = m.state_space();
  const std::size_t n = space.size();
  const bool joint_ig = n <= kJointInfoGainLimit;
  const auto w = kernels::joint_product(space, q.factors);

  PolicyEFE r;
  r.exact = joint_ig;
  for (std::size_t g = 0; g < m.num_modalities(); ++g) {
    const Tensor& a = m.A[g];
    const auto data = a.data();
    const std::size_t outcomes = m.modality_dims[g];
    const auto qo = kernels::predictive(a, w);
    const auto pref = softmax(m.C[g]);
    const auto h = kernels::slice_entropy(a, n);

    for (std::size_t o = 0; o < outcomes; ++o) {
      r.risk += xlogxy(qo[o], pref[o]);
      if (qo[o] > 0.0) r.pragmatic += qo[o] * std::log(pref[o]);
    }
    for (std::size_t s = 0; s < n; ++s)
      if (w[s] > 0.0) r.ambiguity += w[s] * h[s];

    if (joint_ig) {
      // Mutual information between the joint state and this modality's outcome.
      for (std::size_t o = 0; o < outcomes; ++o) {
        if (qo[o] <= 0.0) continue;
        for (std::size_t s = 0; s < n; ++s) {
          const double as = data[o * n + s];
          const double joint = as * w[s];
          if (joint > 0.0) r.info_gain += joint * std::log(as / qo[o]);
        }
      }
    } else {
      r.info_gain += factorwise_info_gain(a, space, q.factors, qo);
    }
  }
  r.info_gain = std::max(r.info_gain, 0.0);
  r.G = r.risk + r.ambiguity;
  return r;
}

PolicyEFE expected_free_energy(const GenerativeModel& m, const BeliefState& belief, const Policy& policy) {
  PolicyEFE total;
  for (const auto& q : expected_states(m, belief, policy)) {
    const auto step = step_free_energy(m, q);
    total.risk += step.risk;
    total.ambiguity += step.ambiguity;
    total.info_gain += step.info_gain;
    total.pragmatic += step.pragmatic;
    total.exact = total.exact && step.exact;
  }
  total.G = total.risk + total.ambiguity;
  return total;
}

EFEReport evaluate_policies(const GenerativeModel& m, const BeliefState& belief, std::span<const Policy> policies) {
  EFEReport report(policies.size());
  std::vector<std::exception_ptr> errors(policies.size());
  const auto count = static_cast<std::ptrdiff_t>(policies.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    try {
      report[k] = expected_free_energy(m, belief, policies[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return report;
}

PolicyPosterior policy_posterior(std::span<const double> G, const Categorical& E, double gamma) {
  if (G.size() != E.size()) throw Error(Errc::DimMismatch, "G and E have different lengths");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(Errc::NonPositiveGamma, "policy precision must be finite and > 0");
  std::vector<double> logits = log_vec(E.probs());
  for (std::size_t k = 0; k < G.size(); ++k) {
    if (std::isnan(G[k]) || G[k] == -std::numeric_limits<double>::infinity())
      throw Error(Errc::NonFinite, "expected free energy is NaN or -inf");
    logits[k] -= gamma * G[k];
    if (std::isnan(logits[k])) logits[k] = -std::numeric_limits<double>::infinity();
  }
  return PolicyPosterior{Categorical(softmax_with_zeros(logits)), gamma};
}

std::vector<std::vector<double>> action_marginals(const PolicyPosterior& pp, std::span<const Policy> policies) {
  if (policies.empty()) throw Error(Errc::Empty, "no policies");
  if (pp.probs.size() != policies.size()) throw Error(Errc::DimMismatch, "policy posterior length does not match policies");
  const std::size_t num_factors = policies.front().controls.at(0).size();
  std::vector<std::vector<double>> marg(num_factors);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    const auto& first = policies[k].controls.at(0);
    if (first.size() != num_factors) throw Error(Errc::DimMismatch, "policies disagree on the number of factors");
    for (std::size_t f = 0; f < num_factors; ++f) {
      if (marg[f].size() <= first[f]) marg[f].resize(first[f] + 1, 0.0);
      marg[f][first[f]] += pp.probs[k];
    }
  }
  return marg;
}

Action select_action(const PolicyPosterior& pp, std::span<const Policy> policies) {
  const auto marg = action_marginals(pp, policies);
  Action action(marg.size());
  for (std::size_t f = 0; f < marg.size(); ++f) {
    const double top = *std::max_element(marg[f].begin(), marg[f].end());
    action[f] = static_cast<std::size_t>(
        std::find_if(marg[f].begin(), marg[f].end(), [&](double p) { return p >= top - kTieTol; }) - marg[f].begin());
  }
  return action;
}

std::vector<Action> enumerate_actions(const GenerativeModel& m) {
  std::vector<std::size_t> controls(m.num_factors());
  for (std::size_t f = 0; f < m.num_factors(); ++f) controls[f] = m.num_controls(f);
  const StateSpace space(controls);
  std::vector<Action> out;
  out.reserve(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) out.push_back(space.decode(k));
  return out;
}

// ---------------------------------------------------------------------------
// Sophisticated planning

namespace {

struct Branch {
  double prob;
  BeliefState posterior;
};

/// Outcome branches after reaching `predicted`, pruned and renormalized.
std::vector<Branch> outcome_branches(const GenerativeModel& m, const BeliefState& predicted, double threshold) {
  const StateSpace space = m.state_space();
  const std::size_t n = space.size();
  const auto w = kernels::joint_product(space, predicted.factors);
  const StateSpace outcomes(m.modality_dims);

  struct Raw {
    double prob;
    std::vector<double> joint;
  };
  std::vector<Raw> raw;
  std::size_t most_likely = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    std::vector<double> joint(n);
    double p = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double v = w[s];
      for (std::size_t g = 0; g < m.num_modalities() && v > 0.0; ++g) v *= m.A[g].data()[outcomes.digit(k, g) * n + s];
      joint[s] = v;
      p += v;
    }
    if (p <= 0.0) continue;
    if (raw.empty() || p > raw[most_likely].prob) most_likely = raw.size();
    raw.push_back({p, std::move(joint)});
  }

  // If every branch falls below the threshold the most likely one survives.
  const bool any_kept = std::any_of(raw.begin(), raw.end(), [&](const Raw& r) { return r.prob >= threshold; });
  std::vector<Branch> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const bool keep = any_kept ? raw[i].prob >= threshold : i == most_likely;
    if (!keep) continue;
    std::vector<std::vector<double>> marg(space.num_factors());
    for (std::size_t f = 0; f < space.num_factors(); ++f) marg[f].assign(space.dims()[f], 0.0);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t f = 0; f < space.num_factors(); ++f) marg[f][space.digit(s, f)] += raw[i].joint[s];
    BeliefState post;
    post.precision = predicted.precision;
    for (auto& v : marg) post.factors.push_back(normalize(v));
    out.push_back({raw[i].prob, std::move(post)});
    total += raw[i].prob;
  }
  for (auto& b : out) b.prob /= total;
  return out;
}

class Planner {
 public:
  Planner(const GenerativeModel& m, const PlannerOptions& opts)
      : m_(m), opts_(opts), actions_(enumerate_actions(m)) {}

  const std::vector<Action>& actions() const { return actions_; }

  /// Value of taking `action` from `belief` with `depth` steps remaining (depth >= 1).
  double action_value(const BeliefState& belief, const Action& action, std::size_t depth, std::size_t& nodes) const {
    if (++nodes > opts_.node_budget) throw Error(Errc::BudgetExceeded, "sophisticated planner exceeded its node budget");
    const BeliefState predicted = transition(m_, belief, action);
    double value = step_free_energy(m_, predicted).G;
    if (depth > 1) {
      for (const auto& branch : outcome_branches(m_, predicted, opts_.prune_threshold))
        value += branch.prob * belief_value(branch.posterior, depth - 1, nodes);
    }
    return value;
  }

  double belief_value(const BeliefState& belief, std::size_t depth, std::size_t& nodes) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : actions_) best = std::min(best, action_value(belief, a, depth, nodes));
    return best;
  }

 private:
  const GenerativeModel& m_;
  PlannerOptions opts_;
  std::vector<Action> actions_;
};

void check_planner(const GenerativeModel& m, const BeliefState& belief, const PlannerOptions& opts) {
  check_beliefs(m, belief);
  if (opts.depth < 1) throw Error(Errc::InvalidArgument, "planning depth must be >= 1");
  if (!(opts.prune_threshold >= 0.0) || opts.prune_threshold > 1.0)
    throw Error(Errc::InvalidArgument, "prune threshold must lie in [0, 1]");
}

PlanResult pick(const std::vector<Action>& actions, const std::vector<double>& values, std::size_t nodes) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] < values[best] - kTieTol) best = k;
  return PlanResult{actions[best], values[best], nodes};
}

}  // namespace

PlanResult plan_sophisticated(const GenerativeModel& m, const BeliefState& belief, const PlannerOptions& opts) {
  check_planner(m, belief, opts);
  const Planner planner(m, opts);
  const auto& actions = planner.actions();
  std::vector<double> values(actions.size());
  std::vector<std::size_t> nodes(actions.size(), 0);
  std::vector<std::exception_ptr> errors(actions.size());
  const auto count = static_cast<std::ptrdiff_t>(actions.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    try {
      values[k] = planner.action_value(belief, actions[k], opts.depth, nodes[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::size_t total = 0;
  for (auto n : nodes) total += n;
  if (total > opts.node_budget) throw Error(Errc::BudgetExceeded, "sophisticated planner exceeded its node budget");
  return pick(actions, values, total);
}

namespace serial {

EFEReport evaluate_policies(const GenerativeModel& m, const BeliefState& belief, std::span<const Policy> policies) {
  EFEReport report;
  report.reserve(policies.size());
  for (const auto& p : policies) report.push_back(expected_free_energy(m, belief, p));
  return report;
}

PlanResult plan_sophisticated(const GenerativeModel& m, const BeliefState& belief, const PlannerOptions& opts) {
  check_planner(m, belief, opts);
  const Planner planner(m, opts);
  std::size_t nodes = 0;
  std::vector<double> values;
  for (const auto& a : planner.actions()) values.push_back(planner.action_value(belief, a, opts.depth, nodes));
  return pick(planner.actions(), values, nodes);
}

}  // namespace serial

}  // namespace aif
