#include "aif/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <thread>

#include "aif/env.hpp"
#include "aif/inference.hpp"
#include "aif/transport.hpp"

namespace aif {

using nlohmann::json;

namespace {

constexpr const char* kWhatNames[] = {"elephant", "statue", "empty"};
constexpr const char* kPartNames[] = {"trunk", "leg", "tail"};

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

net::SharedFactorRegistry default_registry() {
  net::SharedFactorRegistry reg;
  reg.add(0, {elephant::kNumWhat, "what: elephant | statue | empty", Categorical::uniform(elephant::kNumWhat)});
  return reg;
}

std::size_t what_from_json(const json& v) {
  if (v.is_string()) {
    for (std::size_t i = 0; i < elephant::kNumWhat; ++i)
      if (v.get<std::string>() == kWhatNames[i]) return i;
    config_error("true_what must be elephant, statue or empty");
  }
  return v.get<std::size_t>();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename Range>
std::string join(const Range& r) {
  std::string out;
  bool first = true;
  for (const auto& x : r) {
    if (!first) out.push_back(';');
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(x)>>) out += fmt(x);
    else out += std::to_string(x);
  }
  return out;
}

}  // namespace

// --- config ---------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults_for(const std::string& scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  if (scenario == "elephant") {
    c.agents = 3;
    c.steps = 5;
    c.depth = 0;
  }
  c.registry = default_registry();
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) config_error("config must be an object");
  std::string scenario = "tmaze";
  if (doc.contains("scenario")) {
    if (!doc.at("scenario").is_string()) config_error("scenario must be a string");
    scenario = doc.at("scenario").get<std::string>();
  }
  ExperimentConfig c = defaults_for(scenario);
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "scenario") continue;
      else if (key == "agents") c.agents = v.get<std::size_t>();
      else if (key == "steps") c.steps = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "share") c.share = v.get<bool>();
      else if (key == "k") c.k = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "depth") c.depth = v.get<std::size_t>();
      else if (key == "transport") c.transport = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "reward_prob") c.reward_prob = v.get<double>();
      else if (key == "reward_preference") c.reward_preference = v.get<double>();
      else if (key == "node_budget") c.node_budget = v.get<std::size_t>();
      else if (key == "noise") c.noise = v.get<double>();
      else if (key == "true_what") c.true_what = what_from_json(v);
      else if (key == "placements") c.placements = v.get<std::vector<std::size_t>>();
      else if (key == "registry") c.registry = net::SharedFactorRegistry::from_json(v);
      else config_error("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    config_error(std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw;
    config_error(e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

json ExperimentConfig::to_json() const {
  json doc{{"scenario", scenario}, {"agents", agents}, {"steps", steps},  {"seed", seed},
           {"share", share},       {"k", effective_k()}, {"gamma", gamma}, {"depth", depth},
           {"transport", transport}, {"out", out}};
  if (scenario == "tmaze") {
    doc["reward_prob"] = reward_prob;
    doc["reward_preference"] = reward_preference;
    doc["node_budget"] = node_budget;
  } else {
    doc["noise"] = noise;
    doc["true_what"] = true_what < elephant::kNumWhat ? kWhatNames[true_what] : "?";
    doc["placements"] = effective_placements();
    doc["registry"] = registry.to_json();
  }
  return doc;
}

std::vector<std::size_t> ExperimentConfig::effective_placements() const {
  if (!placements.empty()) return placements;
  std::vector<std::size_t> p(agents);
  for (std::size_t i = 0; i < agents; ++i) p[i] = i % elephant::kNumParts;
  return p;
}

void ExperimentConfig::validate() const {
  if (scenario != "tmaze" && scenario != "elephant") config_error("scenario must be tmaze or elephant");
  if (steps == 0) config_error("steps must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) config_error("gamma must be positive and finite");
  if (transport != "mem" && transport != "socket") config_error("transport must be mem or socket");
  if (out.empty()) config_error("out must not be empty");
  if (scenario == "tmaze") {
    if (agents != 1) config_error("tmaze runs a single agent");
    if (!(reward_prob >= 0.0 && reward_prob <= 1.0)) config_error("reward_prob must lie in [0, 1]");
    if (!std::isfinite(reward_preference)) config_error("reward_preference must be finite");
    if (node_budget == 0) config_error("node_budget must be >= 1");
  } else {
    if (agents < 2) config_error("elephant needs at least 2 agents");
    if (share && (effective_k() < 1 || effective_k() > agents - 1)) config_error("k must lie in [1, agents - 1]");
    if (!(noise >= 0.0 && noise < 1.0)) config_error("noise must lie in [0, 1)");
    if (true_what >= elephant::kNumWhat) config_error("true_what out of range");
    if (!placements.empty() && placements.size() != agents) config_error("placements needs one entry per agent");
    for (std::size_t p : placements)
      if (p >= elephant::kNumParts) config_error("placement out of range");
    if (!registry.contains(0) || registry.at(0).cardinality != elephant::kNumWhat)
      config_error("registry must define factor 0 with cardinality 3");
  }
}

// --- metrics --------------------------------------------------------------

double synchrony(const Categorical& a, const Categorical& b) {
  if (a.size() != b.size()) throw Error(Errc::DimMismatch, "synchrony needs equal dimensions");
  double js = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double mid = 0.5 * (a[i] + b[i]);
    js += 0.5 * xlogxy(a[i], mid) + 0.5 * xlogxy(b[i], mid);
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

double mean_pairwise_synchrony(std::span<const Categorical> beliefs) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < beliefs.size(); ++i)
    for (std::size_t j = i + 1; j < beliefs.size(); ++j, ++pairs) total += synchrony(beliefs[i], beliefs[j]);
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

// --- T-maze ---------------------------------------------------------------

RunResult run_single_agent(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != "tmaze") config_error("run_single_agent needs the tmaze scenario");

  const tmaze::Params params{cfg.reward_prob, cfg.reward_preference};
  const GenerativeModel m = tmaze::build_model(params);
  const auto policies = enumerate_policies(m, std::max<std::size_t>(cfg.depth, 1));
  const Categorical E = Categorical::uniform(policies.size());
  const PlannerOptions popts{cfg.depth, 1.0 / 16.0, cfg.node_budget};

  TMazeEnv env(params);
  Observation obs = env.reset(cfg.seed);
  BeliefState prior = m.prior();

  RunResult run;
  run.config = cfg;
  run.true_state = env.true_state();
  AgentLog log{"agent0", {}};
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    StepRecord rec;
    rec.t = t;
    rec.obs = obs;
    const BeliefState q = infer_states(m, obs, prior).beliefs;
    rec.beliefs = q.factors;
    rec.free_energy = variational_free_energy(q, m, obs, prior).free_energy;
    rec.efe = evaluate_policies(m, q, policies);
    std::vector<double> G;
    for (const auto& e : rec.efe) G.push_back(e.G);
    const PolicyPosterior pp = policy_posterior(G, E, cfg.gamma);
    rec.policy_probs = pp.probs.vec();
    rec.action_marginals = action_marginals(pp, policies);
    rec.action = cfg.depth == 0 ? select_action(pp, policies) : plan_sophisticated(m, q, popts).action;
    log.steps.push_back(rec);

    obs = env.step(rec.action);
    prior = transition(m, q, rec.action);
  }

  std::vector<std::size_t> moves;
  for (const auto& s : log.steps) moves.push_back(s.action[0]);
  std::optional<std::size_t> first_arm;
  std::optional<std::size_t> cue_at;
  for (std::size_t t = 0; t < moves.size(); ++t) {
    if (!cue_at && moves[t] == tmaze::kCue) cue_at = t;
    if (!first_arm && (moves[t] == tmaze::kLeft || moves[t] == tmaze::kRight)) {
      first_arm = t;
      break;
    }
  }
  const std::size_t context = run.true_state[1];
  const std::size_t correct = context == tmaze::kContextLeft ? tmaze::kLeft : tmaze::kRight;
  // Arm bias: which arm the policy posterior favours one step in (after a cue
  // visit at t = 0). Ties go to the left arm.
  const auto& marg = log.steps[std::min<std::size_t>(1, log.steps.size() - 1)].action_marginals[0];
  const std::size_t preferred = marg[tmaze::kRight] > marg[tmaze::kLeft] ? tmaze::kRight : tmaze::kLeft;
  run.summary = {{"moves", moves},
                 {"context", context == tmaze::kContextLeft ? "left" : "right"},
                 {"cue_before_arm", cue_at.has_value() && (!first_arm || *cue_at < *first_arm)},
                 {"arm", first_arm ? json(moves[*first_arm] == tmaze::kLeft ? "left" : "right") : json(nullptr)},
                 {"correct_arm", first_arm.has_value() && moves[*first_arm] == correct},
                 {"arm_marginals", {marg[tmaze::kLeft], marg[tmaze::kRight]}},
                 {"preferred_arm", preferred == tmaze::kLeft ? "left" : "right"},
                 {"prefers_correct_arm", preferred == correct}};
  run.agents.push_back(std::move(log));
  return run;
}

// --- elephant room --------------------------------------------------------

namespace {

std::unique_ptr<net::Transport> make_transport(const std::string& kind, std::size_t n) {
  if (kind == "socket") return std::make_unique<net::SocketTransport>(n);
  return std::make_unique<net::MemoryTransport>(n);
}

/// Blocks until `want` messages stamped `round` have arrived at `endpoint`.
std::vector<net::BeliefMessage> gather(net::Transport& bus, std::size_t endpoint, std::size_t want, std::uint64_t round) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::seconds(10);
  std::vector<net::BeliefMessage> got;
  while (got.size() < want) {
    auto res = bus.poll(endpoint);
    if (!res.errors.empty()) throw res.errors.front();
    for (auto& msg : res.messages) {
      if (msg.timestamp != round) throw Error(Errc::InvalidMessage, "message from another round");
      got.push_back(std::move(msg));
    }
    if (got.size() >= want) break;
    if (clock::now() > deadline) throw Error(Errc::IoError, "timed out waiting for peer messages");
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  return got;
}

net::SpatialAddress agent_address(std::size_t agent, std::size_t part) {
  return {{"room", kPartNames[part], "agent-" + std::to_string(agent)}, std::nullopt};
}

}  // namespace

Categorical pooled_what_posterior(const ExperimentConfig& cfg, std::span<const Observation> history) {
  const auto placements = cfg.effective_placements();
  GenerativeModel pooled;
  pooled.factor_dims = {elephant::kNumWhat};
  for (std::size_t i = 0; i < placements.size(); ++i) {
    pooled.modality_dims.push_back(elephant::kNumFeatures);
    pooled.A.push_back(elephant::part_likelihood(cfg.noise, placements[i]));
    pooled.C.emplace_back(elephant::kNumFeatures, 0.0);
  }
  Tensor b({elephant::kNumWhat, elephant::kNumWhat, 1});
  for (std::size_t s = 0; s < elephant::kNumWhat; ++s) b.at({s, s, 0}) = 1.0;
  pooled.B = {std::move(b)};
  pooled.D = {cfg.registry.at(0).prior};

  std::vector<Observation> features;
  for (const auto& obs : history) {
    Observation f;
    for (std::size_t i = 0; i < placements.size(); ++i) f.push_back(obs[2 * i]);
    features.push_back(std::move(f));
  }
  return exact_posterior(pooled, features).beliefs[0];
}

RunResult run_collective(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != "elephant") config_error("run_collective needs the elephant scenario");

  const std::size_t n = cfg.agents;
  const auto placements = cfg.effective_placements();
  const Categorical& what_prior = cfg.registry.at(0).prior;
  const GenerativeModel m = elephant::build_agent_model(cfg.noise, what_prior);
  const Tensor& feat = m.A[0];

  std::vector<Tensor> part_lik;
  for (std::size_t p = 0; p < elephant::kNumParts; ++p) part_lik.push_back(elephant::part_likelihood(cfg.noise, p));

  std::map<std::string, std::size_t> sender_id;
  for (std::size_t i = 0; i < n; ++i) sender_id[agent_address(i, placements[i]).canonical()] = i;

  ElephantRoomEnv env(cfg.true_what, placements, cfg.noise);
  auto bus = make_transport(cfg.transport, n);

  RunResult run;
  run.config = cfg;
  run.true_state = env.true_state();
  for (std::size_t i = 0; i < n; ++i) run.agents.push_back({"agent" + std::to_string(i), {}});

  std::vector<BeliefState> local(n, m.prior());
  std::vector<std::vector<double>> own(n, std::vector<double>(elephant::kNumWhat, 0.0));
  std::vector<Observation> history;
  std::vector<Categorical> fused(n);

  Observation obs = env.reset(cfg.seed);
  for (std::size_t round = 0; round < cfg.steps; ++round) {
    if (round > 0) obs = env.step({});
    history.push_back(obs);

    std::vector<StepRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Observation oi{obs[2 * i], obs[2 * i + 1]};
      const BeliefState q = exact_posterior(m, oi, local[i]).beliefs;
      recs[i].t = round;
      recs[i].obs = oi;
      recs[i].free_energy = variational_free_energy(q, m, oi, local[i]).free_energy;
      local[i] = q;
      for (std::size_t w = 0; w < elephant::kNumWhat; ++w) {
        const double lik = feat.at({oi[0], w, placements[i]});
        own[i][w] += lik > 0.0 ? std::max(std::log(lik), kLogFloor) : kLogFloor;
      }
    }

    if (cfg.share) {
      for (std::size_t i = 0; i < n; ++i) {
        net::BeliefMessage msg{agent_address(i, placements[i]), 0, own[i], 1.0, round};
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) bus->send(i, j, msg);
      }
      for (std::size_t i = 0; i < n; ++i) {
        auto inbox = gather(*bus, i, n - 1, round);
        std::vector<net::Source> sources;
        std::map<std::size_t, net::BeliefMessage> by_sender;
        for (auto& msg : inbox) {
          auto it = sender_id.find(msg.origin.canonical());
          if (it == sender_id.end() || it->second == i) throw Error(Errc::InvalidMessage, "message from unknown sender");
          by_sender[it->second] = std::move(msg);
        }
        for (const auto& [j, msg] : by_sender) sources.push_back({static_cast<std::uint32_t>(j), part_lik[placements[j]]});
        const auto chosen = net::select_sources(local[i][0], sources, cfg.effective_k());
        std::vector<net::BeliefMessage> use;
        for (auto id : chosen) use.push_back(by_sender.at(id));
        fused[i] = net::fuse_evidence(what_prior, use, std::span<const double>(own[i]));
        recs[i].sources = chosen;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) fused[i] = net::fuse_evidence(what_prior, {}, std::span<const double>(own[i]));
    }

    for (std::size_t i = 0; i < n; ++i) {
      recs[i].beliefs = {fused[i], local[i][1]};
      recs[i].action = {0, 0};
      run.agents[i].steps.push_back(std::move(recs[i]));
    }
    run.synchrony.push_back(mean_pairwise_synchrony(fused));
  }
  bus->close();

  const Categorical pooled = pooled_what_posterior(cfg, history);
  double accuracy = 0.0;
  double max_l1 = 0.0;
  std::vector<double> solo_true;
  for (std::size_t i = 0; i < n; ++i) {
    accuracy += fused[i][cfg.true_what];
    solo_true.push_back(local[i][0][cfg.true_what]);
    double l1 = 0.0;
    for (std::size_t w = 0; w < elephant::kNumWhat; ++w) l1 += std::abs(fused[i][w] - pooled[w]);
    max_l1 = std::max(max_l1, l1);
  }
  run.summary = {{"synchrony", run.synchrony},
                 {"final_mean_synchrony", run.synchrony.back()},
                 {"collective_accuracy", accuracy / static_cast<double>(n)},
                 {"solo_true_mass", solo_true},
                 {"pooled_posterior", pooled.vec()},
                 {"max_l1_to_pooled", max_l1}};
  return run;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  return cfg.scenario == "elephant" ? run_collective(cfg) : run_single_agent(cfg);
}

// --- logs -----------------------------------------------------------------

std::string agent_csv(const AgentLog& log) {
  std::string out = "t,factor,belief,F,G,risk,ambiguity,info_gain,pragmatic,action,obs\n";
  for (const auto& s : log.steps) {
    const std::string t = std::to_string(s.t);
    const std::string tail = "," + join(s.action) + "," + join(s.obs) + "\n";
    for (std::size_t f = 0; f < s.beliefs.size(); ++f)
      out += t + ",s" + std::to_string(f) + "," + join(s.beliefs[f].probs()) + "," + fmt(s.free_energy) + ",,,,," + tail;
    for (std::size_t k = 0; k < s.efe.size(); ++k) {
      const auto& e = s.efe[k];
      out += t + ",pi" + std::to_string(k) + "," + (k < s.policy_probs.size() ? fmt(s.policy_probs[k]) : "") + ",," +
             fmt(e.G) + "," + fmt(e.risk) + "," + fmt(e.ambiguity) + "," + fmt(e.info_gain) + "," + fmt(e.pragmatic) + tail;
    }
    for (std::size_t f = 0; f < s.action_marginals.size(); ++f)
      out += t + ",u" + std::to_string(f) + "," + join(s.action_marginals[f]) + ",,,,,," + tail;
    if (!s.sources.empty()) out += t + ",sources," + join(s.sources) + ",,,,,," + tail;
  }
  return out;
}

json manifest(const RunResult& run) {
  json doc{{"version", kVersion}, {"seed", run.config.seed}, {"config", run.config.to_json()},
           {"true_state", run.true_state}, {"summary", run.summary}};
  doc["files"] = json::array();
  for (const auto& a : run.agents) doc["files"].push_back(a.name + ".csv");
  return doc;
}

void write_logs(const RunResult& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(Errc::IoError, "write failed for " + path.string());
  };
  for (const auto& a : run.agents) write(dir / (a.name + ".csv"), agent_csv(a));
  write(dir / "manifest.json", manifest(run).dump(2) + "\n");
}

}  // namespace aif
