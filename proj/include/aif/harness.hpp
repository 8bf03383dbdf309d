#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aif/belief_net.hpp"
#include "aif/planning.hpp"

namespace aif {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  std::string scenario = "tmaze";  ///< "tmaze" or "elephant"
  std::size_t agents = 1;
  std::size_t steps = 2;
  std::uint64_t seed = 1;
  bool share = true;
  std::optional<std::size_t> k;  ///< sources fused per round; all peers when unset
  double gamma = kDefaultGamma;
  std::size_t depth = 2;  ///< 0 selects from the one-step policy posterior
  std::string transport = "mem";
  std::string out = "out";

  // tmaze
  double reward_prob = 0.95;
  double reward_preference = 3.0;
  std::size_t node_budget = 100'000;

  // elephant
  double noise = 0.1;
  std::size_t true_what = 0;
  std::vector<std::size_t> placements;  ///< part per agent; i mod 3 when empty
  net::SharedFactorRegistry registry;   ///< factor 0 is "what"; defaults to a uniform prior

  /// Scenario-dependent defaults, for a config built with only the scenario set.
  static ExperimentConfig defaults_for(const std::string& scenario);
  /// Reads a config document over the scenario defaults. Unknown keys throw ConfigInvalid.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Resolved config with every default filled in.
  nlohmann::json to_json() const;

  std::size_t effective_k() const { return k.value_or(agents > 0 ? agents - 1 : 0); }
  std::vector<std::size_t> effective_placements() const;
  /// Throws ConfigInvalid on the first inconsistent setting.
  void validate() const;
};

struct StepRecord {
  std::size_t t = 0;
  std::vector<Categorical> beliefs;  ///< posterior per hidden factor after observing
  double free_energy = 0.0;
  EFEReport efe;                     ///< per policy, empty when nothing is planned
  std::vector<double> policy_probs;
  std::vector<std::vector<double>> action_marginals;
  Action action;
  Observation obs;
  std::vector<std::uint32_t> sources;  ///< peers fused this round
};

struct AgentLog {
  std::string name;
  std::vector<StepRecord> steps;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<AgentLog> agents;
  std::vector<std::size_t> true_state;
  std::vector<double> synchrony;  ///< mean pairwise synchrony of the shared factor, per round
  nlohmann::json summary;
};

/// Jensen-Shannon divergence in nats; lies in [0, ln 2].
double synchrony(const Categorical& a, const Categorical& b);
double mean_pairwise_synchrony(std::span<const Categorical> beliefs);

/// Single agent in the T-maze.
RunResult run_single_agent(const ExperimentConfig& cfg);
/// Round-synchronous elephant-room collective.
RunResult run_collective(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg);

/// One CSV per agent plus manifest.json in `dir`.
void write_logs(const RunResult& run, const std::filesystem::path& dir);
std::string agent_csv(const AgentLog& log);
nlohmann::json manifest(const RunResult& run);

/// Exact pooled posterior over "what" given every agent's observations so far,
/// by enumeration. Used as the collective reference.
Categorical pooled_what_posterior(const ExperimentConfig& cfg, std::span<const Observation> history);

}  // namespace aif
