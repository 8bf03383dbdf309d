#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aif/harness.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

nlohmann::json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw aif::Error(aif::Errc::ConfigInvalid, "cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw aif::Error(aif::Errc::ConfigInvalid, path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active inference agents and belief-sharing experiments"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run an experiment and write logs");

  std::string scenario;
  std::string config_path;
  std::size_t agents = 0, steps = 0, k = 0, depth = 0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  bool share = true;
  std::string transport, out;

  run->add_option("scenario", scenario, "tmaze or elephant")->required()->check(CLI::IsMember({"tmaze", "elephant"}));
  run->add_option("--config", config_path, "JSON experiment config; flags override its values");
  auto* o_agents = run->add_option("--agents", agents, "number of agents");
  auto* o_steps = run->add_option("--steps", steps, "steps (tmaze) or rounds (elephant)");
  auto* o_seed = run->add_option("--seed", seed, "random seed");
  auto* o_share = run->add_flag("--share,!--no-share", share, "broadcast and fuse beliefs");
  auto* o_k = run->add_option("--k", k, "sources fused per round");
  auto* o_gamma = run->add_option("--gamma", gamma, "policy precision");
  auto* o_depth = run->add_option("--depth", depth, "planning depth; 0 selects from the policy posterior");
  auto* o_transport = run->add_option("--transport", transport, "mem or socket");
  auto* o_out = run->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  aif::ExperimentConfig cfg;
  try {
    nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : read_config(config_path);
    if (!doc.is_object()) throw aif::Error(aif::Errc::ConfigInvalid, "config must be an object");
    if (doc.contains("scenario") && doc["scenario"] != scenario)
      throw aif::Error(aif::Errc::ConfigInvalid, "config scenario does not match the subcommand");
    doc["scenario"] = scenario;
    if (*o_agents) doc["agents"] = agents;
    if (*o_steps) doc["steps"] = steps;
    if (*o_seed) doc["seed"] = seed;
    if (*o_share) doc["share"] = share;
    if (*o_k) doc["k"] = k;
    if (*o_gamma) doc["gamma"] = gamma;
    if (*o_depth) doc["depth"] = depth;
    if (*o_transport) doc["transport"] = transport;
    if (*o_out) doc["out"] = out;
    cfg = aif::ExperimentConfig::from_json(doc);
  } catch (const aif::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const auto result = aif::run_experiment(cfg);
    aif::write_logs(result, cfg.out);
    std::cout << result.summary.dump() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
