#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aif/model.hpp"

namespace aif {

struct Variable {
  std::string name;
  std::size_t cardinality = 0;
};

struct FactorNode {
  std::string name;
  std::vector<std::size_t> vars;  ///< adjacent variable ids, in table axis order
  Tensor table;                   ///< non-negative, one axis per adjacent variable
};

enum class ScheduleMode { TreeSweep, Flooding };

struct Schedule {
  ScheduleMode mode = ScheduleMode::Flooding;
  int max_iters = 200;
  double tol = 1e-10;
  double damping = 0.5;  ///< log-space weight kept on the previous factor-to-variable message
};

struct SumProductResult {
  std::vector<Categorical> marginals;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Bipartite variable/factor graph with a message store for sum-product.
/// Variable and factor ids are their insertion indices.
class FactorGraph {
 public:
  std::size_t add_variable(std::string name, std::size_t cardinality);
  std::size_t add_factor(std::string name, std::vector<std::size_t> vars, Tensor table);

  const std::vector<Variable>& variables() const noexcept { return vars_; }
  const std::vector<FactorNode>& factors() const noexcept { return factors_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  bool is_connected() const;
  bool is_acyclic() const;
  /// Throws InvalidGraph when the graph is empty or disconnected.
  void validate() const;

  /// Plain-text edge list: one line per variable, factor and edge.
  std::string dump_edge_list() const;

  bool has_run() const noexcept { return has_run_; }
  Categorical marginal(std::size_t variable) const;

  /// Stored messages for edge e (factor-side position order).
  std::span<const double> factor_to_variable(std::size_t edge) const { return msg_fv_.at(edge); }
  std::span<const double> variable_to_factor(std::size_t edge) const { return msg_vf_.at(edge); }

  friend SumProductResult sum_product(FactorGraph& g, const Schedule& s);

 private:
  struct Edge {
    std::size_t factor;
    std::size_t position;
    std::size_t var;
  };

  void reset_messages();
  std::vector<double> compute_variable_message(std::size_t edge) const;
  std::vector<double> compute_factor_message(std::size_t edge) const;
  void run_tree_sweep();
  SumProductResult run_flooding(const Schedule& s);

  std::vector<Variable> vars_;
  std::vector<FactorNode> factors_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> var_edges_;
  std::vector<std::vector<std::size_t>> factor_edges_;
  std::vector<std::vector<double>> msg_vf_;
  std::vector<std::vector<double>> msg_fv_;
  bool has_run_ = false;
};

/// Runs the schedule, then returns every variable's marginal.
SumProductResult sum_product(FactorGraph& g, const Schedule& s);

/// Normalized product of the variable's incoming messages.
Categorical marginal(const FactorGraph& g, std::size_t variable);

/// Factor graph dual to `m` over obs.size() timesteps. Timestep t holds one
/// variable per hidden factor; priors D attach at t = 0, B under
/// policy.controls[t] links t and t + 1, and each modality contributes one
/// likelihood node per timestep, clamped to the observed outcome by slicing
/// (or summed over outcomes when the timestep is unobserved).
FactorGraph build_dual_graph(const GenerativeModel& m, std::span<const std::optional<Observation>> obs,
                             const Policy* policy = nullptr);
FactorGraph build_dual_graph(const GenerativeModel& m, const Observation& obs);

/// Variable id of factor f at timestep t in a graph from build_dual_graph.
inline std::size_t dual_variable(const GenerativeModel& m, std::size_t t, std::size_t f) {
  return t * m.num_factors() + f;
}

}  // namespace aif
