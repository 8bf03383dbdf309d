#include "aif/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace aif {

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (!(sum > 0.0) || !std::isfinite(sum)) throw Error(Errc::ZeroEvidence, "message has no mass; factor tables are inconsistent");
  for (double& x : v) x /= sum;
  return v;
}

double max_change(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

std::size_t FactorGraph::add_variable(std::string name, std::size_t cardinality) {
  if (cardinality < 1) throw Error(Errc::InvalidGraph, "variable cardinality must be >= 1");
  vars_.push_back({std::move(name), cardinality});
  var_edges_.emplace_back();
  has_run_ = false;
  return vars_.size() - 1;
}

std::size_t FactorGraph::add_factor(std::string name, std::vector<std::size_t> vars, Tensor table) {
  if (vars.empty()) throw Error(Errc::InvalidGraph, "factor " + name + " has no variables");
  if (table.rank() != vars.size()) throw Error(Errc::InvalidGraph, "factor " + name + ": table rank differs from arity");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] >= vars_.size()) throw Error(Errc::UnknownVariable, "factor " + name + " references an unknown variable");
    if (table.shape()[i] != vars_[vars[i]].cardinality)
      throw Error(Errc::InvalidGraph, "factor " + name + ": table axis does not match variable cardinality");
    for (std::size_t j = 0; j < i; ++j)
      if (vars[j] == vars[i]) throw Error(Errc::InvalidGraph, "factor " + name + " repeats a variable");
  }
  for (double x : table.data())
    if (!std::isfinite(x) || x < 0.0) throw Error(Errc::InvalidGraph, "factor " + name + " has a negative or non-finite entry");

  const std::size_t id = factors_.size();
  factor_edges_.emplace_back();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::size_t e = edges_.size();
    edges_.push_back({id, i, vars[i]});
    var_edges_[vars[i]].push_back(e);
    factor_edges_[id].push_back(e);
  }
  factors_.push_back({std::move(name), std::move(vars), std::move(table)});
  has_run_ = false;
  return id;
}

bool FactorGraph::is_connected() const {
  const std::size_t total = vars_.size() + factors_.size();
  if (total == 0) return false;
  std::vector<bool> seen(total, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  // Nodes 0..V-1 are variables, V.. are factors.
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    stack.pop_back();
    const auto& adj = node < vars_.size() ? var_edges_[node] : factor_edges_[node - vars_.size()];
    for (std::size_t e : adj) {
      const std::size_t other = node < vars_.size() ? vars_.size() + edges_[e].factor : edges_[e].var;
      if (!seen[other]) {
        seen[other] = true;
        ++count;
        stack.push_back(other);
      }
    }
  }
  return count == total;
}

bool FactorGraph::is_acyclic() const {
  return is_connected() && edges_.size() + 1 == vars_.size() + factors_.size();
}

void FactorGraph::validate() const {
  if (vars_.empty()) throw Error(Errc::InvalidGraph, "graph has no variables");
  if (!is_connected()) throw Error(Errc::InvalidGraph, "graph is not connected");
}

std::string FactorGraph::dump_edge_list() const {
  std::ostringstream os;
  os << "# variables " << vars_.size() << " factors " << factors_.size() << " edges " << edges_.size() << '\n';
  for (std::size_t v = 0; v < vars_.size(); ++v) os << "var " << v << ' ' << vars_[v].name << " card " << vars_[v].cardinality << '\n';
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    os << "factor " << k << ' ' << factors_[k].name << " arity " << factors_[k].vars.size() << " vars";
    for (auto v : factors_[k].vars) os << ' ' << v;
    os << '\n';
  }
  for (const auto& e : edges_) os << "edge f" << e.factor << " v" << e.var << '\n';
  return os.str();
}

void FactorGraph::reset_messages() {
  msg_vf_.assign(edges_.size(), {});
  msg_fv_.assign(edges_.size(), {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const std::size_t card = vars_[edges_[e].var].cardinality;
    msg_vf_[e].assign(card, 1.0 / static_cast<double>(card));
    msg_fv_[e].assign(card, 1.0 / static_cast<double>(card));
  }
}

std::vector<double> FactorGraph::compute_variable_message(std::size_t edge) const {
  const std::size_t v = edges_[edge].var;
  std::vector<double> out(vars_[v].cardinality, 1.0);
  for (std::size_t e : var_edges_[v]) {
    if (e == edge) continue;
    for (std::size_t x = 0; x < out.size(); ++x) out[x] *= msg_fv_[e][x];
  }
  return normalized(std::move(out));
}

std::vector<double> FactorGraph::compute_factor_message(std::size_t edge) const {
  const auto& factor = factors_[edges_[edge].factor];
  const auto& fedges = factor_edges_[edges_[edge].factor];
  const std::size_t target = edges_[edge].position;
  const StateSpace space(factor.table.shape());
  const auto table = factor.table.data();

  std::vector<double> out(factor.table.shape()[target], 0.0);
  for (std::size_t idx = 0; idx < space.size(); ++idx) {
    double w = table[idx];
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < fedges.size() && w != 0.0; ++j)
      if (j != target) w *= msg_vf_[fedges[j]][space.digit(idx, j)];
    out[space.digit(idx, target)] += w;
  }
  return normalized(std::move(out));
}

void FactorGraph::run_tree_sweep() {
  // Root the tree at variable 0; nodes 0..V-1 are variables, V.. are factors.
  const std::size_t num_vars = vars_.size();
  const std::size_t total = num_vars + factors_.size();
  std::vector<std::size_t> order;
  std::vector<std::ptrdiff_t> parent_edge(total, -1);
  std::vector<bool> seen(total, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const std::size_t node = frontier.front();
    frontier.pop();
    order.push_back(node);
    const auto& adj = node < num_vars ? var_edges_[node] : factor_edges_[node - num_vars];
    for (std::size_t e : adj) {
      const std::size_t other = node < num_vars ? num_vars + edges_[e].factor : edges_[e].var;
      if (seen[other]) continue;
      seen[other] = true;
      parent_edge[other] = static_cast<std::ptrdiff_t>(e);
      frontier.push(other);
    }
  }

  // Leaves to root.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::ptrdiff_t e = parent_edge[*it];
    if (e < 0) continue;
    if (*it < num_vars) msg_vf_[e] = compute_variable_message(e);
    else msg_fv_[e] = compute_factor_message(e);
  }
  // Root to leaves.
  for (std::size_t node : order) {
    const auto& adj = node < num_vars ? var_edges_[node] : factor_edges_[node - num_vars];
    for (std::size_t e : adj) {
      if (static_cast<std::ptrdiff_t>(e) == parent_edge[node]) continue;
      if (node < num_vars) msg_vf_[e] = compute_variable_message(e);
      else msg_fv_[e] = compute_factor_message(e);
    }
  }
}

SumProductResult FactorGraph::run_flooding(const Schedule& s) {
  SumProductResult r;
  std::vector<std::vector<double>> next_vf(edges_.size());
  for (int iter = 1; iter <= s.max_iters; ++iter) {
    double change = 0.0;
    for (std::size_t e = 0; e < edges_.size(); ++e) next_vf[e] = compute_variable_message(e);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      change = std::max(change, max_change(next_vf[e], msg_vf_[e]));
      msg_vf_[e] = std::move(next_vf[e]);
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      auto fresh = compute_factor_message(e);
      if (s.damping > 0.0) {
        for (std::size_t x = 0; x < fresh.size(); ++x) {
          const double old = msg_fv_[e][x];
          fresh[x] = (fresh[x] > 0.0 && old > 0.0)
                         ? std::exp(s.damping * std::log(old) + (1.0 - s.damping) * std::log(fresh[x]))
                         : 0.0;
        }
        fresh = normalized(std::move(fresh));
      }
      change = std::max(change, max_change(fresh, msg_fv_[e]));
      msg_fv_[e] = std::move(fresh);
    }
    r.iterations = iter;
    r.residual = change;
    if (change < s.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

SumProductResult sum_product(FactorGraph& g, const Schedule& s) {
  if (s.max_iters < 1 || !(s.tol > 0.0) || s.damping < 0.0 || s.damping >= 1.0)
    throw Error(Errc::InvalidArgument, "schedule needs max_iters >= 1, tol > 0, damping in [0, 1)");
  g.validate();
  g.reset_messages();
  SumProductResult r;
  if (s.mode == ScheduleMode::TreeSweep) {
    if (!g.is_acyclic()) throw Error(Errc::CyclicWithTreeSweep, "tree-sweep schedule requires an acyclic graph");
    g.run_tree_sweep();
    r.converged = true;
    r.iterations = 1;
  } else {
    r = g.run_flooding(s);
  }
  g.has_run_ = true;
  for (std::size_t v = 0; v < g.vars_.size(); ++v) r.marginals.push_back(g.marginal(v));
  return r;
}

Categorical FactorGraph::marginal(std::size_t variable) const {
  if (variable >= vars_.size()) throw Error(Errc::UnknownVariable, "no variable with id " + std::to_string(variable));
  if (!has_run_) throw Error(Errc::NotYetRun, "sum_product has not been run on this graph");
  std::vector<double> out(vars_[variable].cardinality, 1.0);
  for (std::size_t e : var_edges_[variable])
    for (std::size_t x = 0; x < out.size(); ++x) out[x] *= msg_fv_[e][x];
  return Categorical(normalized(std::move(out)));
}

Categorical marginal(const FactorGraph& g, std::size_t variable) { return g.marginal(variable); }

// ---------------------------------------------------------------------------

FactorGraph build_dual_graph(const GenerativeModel& m, std::span<const std::optional<Observation>> obs,
                             const Policy* policy) {
  require_valid(m);
  const std::size_t horizon = obs.size();
  if (horizon == 0) throw Error(Errc::InvalidArgument, "at least one timestep is required");
  if (horizon > 1 && (policy == nullptr || policy->horizon() + 1 < horizon))
    throw Error(Errc::BadControlIndex, "a policy covering every transition is required for multi-step graphs");

  const std::size_t num_factors = m.num_factors();
  const std::size_t num_states = m.num_states();
  FactorGraph g;
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t f = 0; f < num_factors; ++f)
      g.add_variable("s" + std::to_string(f) + "_t" + std::to_string(t), m.factor_dims[f]);

  for (std::size_t f = 0; f < num_factors; ++f)
    g.add_factor("D" + std::to_string(f), {dual_variable(m, 0, f)}, Tensor({m.factor_dims[f]}, m.D[f].vec()));

  for (std::size_t t = 0; t + 1 < horizon; ++t) {
    const auto& action = policy->controls[t];
    if (action.size() != num_factors) throw Error(Errc::BadControlIndex, "expected one control per factor");
    for (std::size_t f = 0; f < num_factors; ++f) {
      const std::size_t n = m.factor_dims[f];
      if (action[f] >= m.num_controls(f)) throw Error(Errc::BadControlIndex, "control index out of range");
      // Axis order [s_t, s_{t+1}].
      Tensor table({n, n});
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t sp = 0; sp < n; ++sp) table.at({s, sp}) = m.B[f].at({sp, s, action[f]});
      g.add_factor("B" + std::to_string(f) + "_t" + std::to_string(t),
                   {dual_variable(m, t, f), dual_variable(m, t + 1, f)}, std::move(table));
    }
  }

  for (std::size_t t = 0; t < horizon; ++t) {
    if (obs[t]) check_observation(m, *obs[t]);
    std::vector<std::size_t> vars(num_factors);
    for (std::size_t f = 0; f < num_factors; ++f) vars[f] = dual_variable(m, t, f);
    for (std::size_t g_idx = 0; g_idx < m.num_modalities(); ++g_idx) {
      const auto a = m.A[g_idx].data();
      std::vector<double> slice(num_states, 0.0);
      if (obs[t]) {
        const std::size_t o = (*obs[t])[g_idx];
        std::copy(a.begin() + o * num_states, a.begin() + (o + 1) * num_states, slice.begin());
      } else {
        for (std::size_t o = 0; o < m.modality_dims[g_idx]; ++o)
          for (std::size_t s = 0; s < num_states; ++s) slice[s] += a[o * num_states + s];
      }
      g.add_factor("A" + std::to_string(g_idx) + "_t" + std::to_string(t), vars, Tensor(m.factor_dims, std::move(slice)));
    }
  }
  return g;
}

FactorGraph build_dual_graph(const GenerativeModel& m, const Observation& obs) {
  const std::optional<Observation> one = obs;
  return build_dual_graph(m, std::span<const std::optional<Observation>>(&one, 1));
}

}  // namespace aif
