#include "aif/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aif/kernels.hpp"

namespace aif {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_enumerable(const GenerativeModel& m) {
  if (m.num_states() > kEnumerationLimit)
    throw Error(Errc::TooLarge, "joint state space of " + std::to_string(m.num_states()) + " exceeds the enumeration limit");
}

ExactPosterior exact_impl(const GenerativeModel& m, std::span<const Categorical> prior, std::span<const Observation> seq) {
  check_enumerable(m);
  const StateSpace space = m.state_space();
  const std::size_t n = space.size();

  std::vector<double> log_joint = log_vec(kernels::joint_product(space, prior));
  for (const auto& obs : seq) {
    const auto ll = kernels::joint_log_likelihood(m, obs);
    for (std::size_t s = 0; s < n; ++s) log_joint[s] += ll[s];
  }
  const double top = *std::max_element(log_joint.begin(), log_joint.end());
  if (top == kNegInf) throw Error(Errc::ZeroEvidence, "observations have zero probability under the model");

  std::vector<double> joint(n);
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    joint[s] = std::exp(log_joint[s] - top);
    sum += joint[s];
  }
  for (double& p : joint) p /= sum;

  std::vector<std::vector<double>> marg(space.num_factors());
  for (std::size_t f = 0; f < space.num_factors(); ++f) marg[f].assign(space.dims()[f], 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t f = 0; f < space.num_factors(); ++f) marg[f][space.digit(s, f)] += joint[s];

  ExactPosterior out;
  for (auto& v : marg) out.beliefs.factors.push_back(normalize(v));
  out.log_evidence = top + std::log(sum);
  out.joint = std::move(joint);
  return out;
}

}  // namespace

ExactPosterior exact_posterior(const GenerativeModel& m, const Observation& obs) {
  return exact_impl(m, m.D, std::span<const Observation>(&obs, 1));
}

ExactPosterior exact_posterior(const GenerativeModel& m, const Observation& obs, const BeliefState& prior) {
  check_beliefs(m, prior);
  return exact_impl(m, prior.factors, std::span<const Observation>(&obs, 1));
}

ExactPosterior exact_posterior(const GenerativeModel& m, std::span<const Observation> sequence) {
  return exact_impl(m, m.D, sequence);
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, double>> FreeEnergyReport::to_record() const {
  std::vector<std::pair<std::string, double>> rec{
      {"free_energy", free_energy}, {"complexity", complexity}, {"accuracy", accuracy}};
  if (negative_log_evidence) rec.emplace_back("negative_log_evidence", *negative_log_evidence);
  return rec;
}

FreeEnergyReport variational_free_energy(const BeliefState& q, const GenerativeModel& m, const Observation& obs,
                                         bool with_evidence) {
  return variational_free_energy(q, m, obs, m.prior(), with_evidence);
}

FreeEnergyReport variational_free_energy(const BeliefState& q, const GenerativeModel& m, const Observation& obs,
                                         const BeliefState& prior, bool with_evidence) {
  check_beliefs(m, q);
  check_beliefs(m, prior);
  check_enumerable(m);

  FreeEnergyReport r;
  for (std::size_t f = 0; f < q.num_factors(); ++f) r.complexity += kl_divergence(q[f], prior[f]);

  const auto w = kernels::joint_product(m.state_space(), q.factors);
  const auto ll = kernels::joint_log_likelihood(m, obs);
  for (std::size_t s = 0; s < w.size(); ++s)
    if (w[s] > 0.0) r.accuracy += w[s] * ll[s];

  r.free_energy = r.complexity - r.accuracy;
  if (with_evidence) r.negative_log_evidence = -exact_posterior(m, obs, prior).log_evidence;
  return r;
}

// ---------------------------------------------------------------------------

InferenceResult infer_states(const GenerativeModel& m, const Observation& obs, const InferenceOptions& opts) {
  return infer_states(m, obs, m.prior(), opts);
}

InferenceResult infer_states(const GenerativeModel& m, const Observation& obs, const BeliefState& prior,
                             const InferenceOptions& opts) {
  check_beliefs(m, prior);
  check_enumerable(m);
  if (opts.max_iters < 1 || !(opts.tol > 0.0) || opts.damping < 0.0 || opts.damping >= 1.0)
    throw Error(Errc::InvalidArgument, "infer_states options out of range");

  const StateSpace space = m.state_space();
  const std::size_t n = space.size();
  const std::size_t num_factors = space.num_factors();
  auto ll = kernels::joint_log_likelihood(m, obs);
  {
    // An expectation of ln 0 under another factor's belief would poison every
    // value of this factor, so impossible joint states get a finite floor once
    // the observation is known to be possible at all.
    const auto prior_joint = kernels::joint_product(space, prior.factors);
    bool possible = false;
    for (std::size_t s = 0; s < n; ++s) possible = possible || (prior_joint[s] > 0.0 && ll[s] > kNegInf);
    if (!possible) throw Error(Errc::ZeroEvidence, "observation is impossible under the prior");
    for (double& x : ll) x = std::max(x, kLogFloor);
  }

  std::vector<std::vector<double>> log_prior(num_factors);
  std::vector<std::vector<double>> q(num_factors);
  std::vector<std::vector<double>> log_q(num_factors);
  for (std::size_t f = 0; f < num_factors; ++f) {
    log_prior[f] = log_vec(prior[f].probs());
    q[f] = prior[f].vec();
    log_q[f] = log_prior[f];
  }

  InferenceResult result;
  std::vector<double> target;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    double residual = 0.0;
    for (std::size_t f = 0; f < num_factors; ++f) {
      // Expected log-likelihood for each value of factor f under the other factors.
      target.assign(space.dims()[f], 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        double w = 1.0;
        for (std::size_t g = 0; g < num_factors; ++g)
          if (g != f) w *= q[g][space.digit(s, g)];
        if (w > 0.0) target[space.digit(s, f)] += w * ll[s];
      }
      for (std::size_t k = 0; k < target.size(); ++k) {
        const double fresh = log_prior[f][k] + target[k];
        log_q[f][k] = (fresh == kNegInf || log_q[f][k] == kNegInf)
                          ? kNegInf
                          : opts.damping * log_q[f][k] + (1.0 - opts.damping) * fresh;
      }
      std::vector<double> updated;
      try {
        updated = softmax_with_zeros(log_q[f]);
      } catch (const Error&) {
        throw Error(Errc::ZeroEvidence, "observation is impossible under the current beliefs");
      }
      for (std::size_t k = 0; k < updated.size(); ++k) residual = std::max(residual, std::abs(updated[k] - q[f][k]));
      q[f] = std::move(updated);
      log_q[f] = log_vec(q[f]);
    }
    result.iterations = iter;
    result.residual = residual;
    if (residual < opts.tol) {
      result.converged = true;
      break;
    }
  }
  for (auto& v : q) result.beliefs.factors.push_back(normalize(v));
  result.beliefs.precision = prior.precision;
  return result;
}

// ---------------------------------------------------------------------------

DirichletCounts::DirichletCounts(Tensor counts) : counts_(std::move(counts)) {
  if (counts_.rank() < 1 || counts_.size() == 0) throw Error(Errc::ShapeMismatch, "Dirichlet counts need a non-empty tensor");
  for (double c : counts_.data())
    if (!std::isfinite(c) || !(c > 0.0)) throw Error(Errc::NegativeEntry, "Dirichlet counts must be finite and > 0");
}

DirichletCounts DirichletCounts::filled(std::vector<std::size_t> shape, double value) {
  return DirichletCounts(Tensor(std::move(shape), value));
}

Tensor DirichletCounts::expected() const {
  Tensor out = counts_;
  const std::size_t rows = counts_.shape()[0];
  const std::size_t cols = counts_.size() / rows;
  auto data = out.data();
  for (std::size_t c = 0; c < cols; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sum += data[r * cols + c];
    for (std::size_t r = 0; r < rows; ++r) data[r * cols + c] /= sum;
  }
  return out;
}

namespace {

void check_lr(double lr) {
  if (!std::isfinite(lr) || !(lr > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must be finite and > 0");
}

}  // namespace

DirichletCounts update_likelihood_counts(const DirichletCounts& counts, std::size_t outcome, const BeliefState& q,
                                         double lr) {
  check_lr(lr);
  const auto& shape = counts.counts().shape();
  if (shape.size() != q.num_factors() + 1) throw Error(Errc::ShapeMismatch, "likelihood counts rank does not match beliefs");
  std::vector<std::size_t> dims(shape.begin() + 1, shape.end());
  for (std::size_t f = 0; f < dims.size(); ++f)
    if (dims[f] != q[f].size()) throw Error(Errc::ShapeMismatch, "belief cardinality does not match counts");
  if (outcome >= shape[0]) throw Error(Errc::ShapeMismatch, "outcome index out of range");

  const StateSpace space(dims);
  const auto w = kernels::joint_product(space, q.factors);
  Tensor next = counts.counts();
  auto data = next.data();
  for (std::size_t s = 0; s < space.size(); ++s) data[outcome * space.size() + s] += lr * w[s];
  return DirichletCounts(std::move(next));
}

DirichletCounts update_transition_counts(const DirichletCounts& counts, const Categorical& q_prev,
                                         const Categorical& q_next, std::size_t control, double lr) {
  check_lr(lr);
  const auto& shape = counts.counts().shape();
  if (shape.size() != 3 || shape[0] != shape[1]) throw Error(Errc::ShapeMismatch, "transition counts must be [n, n, controls]");
  if (q_prev.size() != shape[1] || q_next.size() != shape[0]) throw Error(Errc::ShapeMismatch, "belief cardinality does not match counts");
  if (control >= shape[2]) throw Error(Errc::ShapeMismatch, "control index out of range");

  Tensor next = counts.counts();
  for (std::size_t sp = 0; sp < shape[0]; ++sp)
    for (std::size_t s = 0; s < shape[1]; ++s) next.at({sp, s, control}) += lr * q_next[sp] * q_prev[s];
  return DirichletCounts(std::move(next));
}

// ---------------------------------------------------------------------------

ModelComparisonResult compare_models(std::span<const GenerativeModel> candidates, std::span<const Observation> sequence) {
  if (candidates.empty()) throw Error(Errc::Empty, "no candidate models");
  ModelComparisonResult r;
  r.free_energies.reserve(candidates.size());
  for (const auto& m : candidates) {
    double f = std::numeric_limits<double>::infinity();
    try {
      f = -exact_posterior(m, sequence).log_evidence;
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroEvidence) throw;
    }
    r.free_energies.push_back(f);
  }
  for (std::size_t i = 1; i < r.free_energies.size(); ++i)
    if (r.free_energies[i] < r.free_energies[r.selected]) r.selected = i;
  return r;
}

ModelComparisonResult compare_models(std::span<const GenerativeModel> candidates, const Observation& obs) {
  return compare_models(candidates, std::span<const Observation>(&obs, 1));
}

}  // namespace aif
